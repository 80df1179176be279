"""Training-example construction: windows, track subsetting, masking, packing.

Each piece contributes one example per build: a uniformly placed n-bar
window with at most max_tracks tracks in a random order, encoded as
MultiTrack or (with a random bar selection) BarFill. Randomness derives
from (seed, piece index) so builds are byte-identical across runs and
trivially shardable. Overlong sequences are dropped, never truncated:
truncation would break the grammar.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import codec, density
from .errors import MalformedFile, TooShort
from .midi_core import Piece, QuantizedTrack
from .vocab import BARFILL, MULTITRACK, TokenSequence, vocab_hash

DEFAULT_MAX_LEN = 2048


@dataclass(frozen=True)
class BuildConfig:
    """(n_bars, max_tracks) defaults pair 4 bars with 12 tracks; the 8-bar
    variant caps at 6 tracks."""

    n_bars: int = 4
    max_tracks: int = 12
    max_len: int = DEFAULT_MAX_LEN
    mode: str = MULTITRACK
    mask_rate: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_bars < 1 or self.max_tracks < 1 or self.max_len < 1:
            raise ValueError("n_bars, max_tracks, max_len must be positive")
        if self.mode not in (MULTITRACK, BARFILL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.mask_rate <= 1:
            raise ValueError(f"mask_rate {self.mask_rate} outside [0, 1]")

    @classmethod
    def eight_bar(cls, **overrides) -> "BuildConfig":
        base = dict(n_bars=8, max_tracks=6)
        base.update(overrides)
        return cls(**base)


def piece_rng(cfg: BuildConfig, index: int) -> random.Random:
    # per-piece stream: finest-grained sharding, order-independent merges
    return random.Random((cfg.seed << 20) ^ (index * 0x9E3779B1 & 0x7FFFFFFF))


def sample_window(piece: Piece, cfg: BuildConfig, rng: random.Random) -> Piece:
    """Uniform contiguous n-bar window; a uniform max_tracks-subset of the
    tracks when there are too many; track order uniformly shuffled."""
    if piece.n_bars < cfg.n_bars:
        raise TooShort(f"piece has {piece.n_bars} bars, window needs {cfg.n_bars}")
    start = rng.randint(0, piece.n_bars - cfg.n_bars)
    tracks: list[QuantizedTrack] = [
        QuantizedTrack(t.instrument, t.bars[start : start + cfg.n_bars]) for t in piece.tracks
    ]
    if len(tracks) > cfg.max_tracks:
        keep = rng.sample(range(len(tracks)), cfg.max_tracks)
        tracks = [tracks[i] for i in sorted(keep)]
    rng.shuffle(tracks)
    return Piece(tuple(tracks))


def _draw_selection(
    cells: Sequence[tuple[int, int]], rate: float, rng: random.Random
) -> list[tuple[int, int]]:
    return [cell for cell in cells if rng.random() < rate]


def choose_selection(window: Piece, cfg: BuildConfig, rng: random.Random) -> list[tuple[int, int]]:
    """Bernoulli(mask_rate) per bar, redrawn once if empty or total; a total
    selection then loses one uniform cell and an empty one (at positive
    rate) gains one, so masked examples keep context and a fill."""
    cells = [(t, b) for t in range(window.n_tracks) for b in range(window.n_bars)]
    selection = _draw_selection(cells, cfg.mask_rate, rng)
    if not selection or len(selection) == len(cells):
        selection = _draw_selection(cells, cfg.mask_rate, rng)
    if selection and len(selection) == len(cells):
        selection.remove(cells[rng.randrange(len(cells))])
    if not selection and cfg.mask_rate > 0:
        selection = [cells[rng.randrange(len(cells))]]
    return selection


def make_example(
    window: Piece, cfg: BuildConfig, table: density.DensityTable, rng: random.Random
) -> TokenSequence:
    levels = density.assign_levels(window, table)
    if cfg.mode == MULTITRACK:
        return codec.encode_multitrack(window, levels)
    return codec.encode_barfill(window, choose_selection(window, cfg, rng), levels)


def examples_from_pieces(
    pieces: Iterable[Piece], cfg: BuildConfig, table: density.DensityTable
) -> Iterator[TokenSequence]:
    """Skips pieces shorter than the window."""
    for index, piece in enumerate(pieces):
        rng = piece_rng(cfg, index)
        try:
            window = sample_window(piece, cfg, rng)
        except TooShort:
            continue
        yield make_example(window, cfg, table, rng)


# --- packing ---

_DATASET_MAGIC = b"TSDS"
_HISTOGRAM_BUCKET = 256


def length_stats(lengths: Sequence[int], max_len: int) -> dict:
    histogram: dict[str, int] = {}
    for n in lengths:
        lo = (n // _HISTOGRAM_BUCKET) * _HISTOGRAM_BUCKET
        key = f"[{lo},{lo + _HISTOGRAM_BUCKET})"
        histogram[key] = histogram.get(key, 0) + 1
    kept = sum(1 for n in lengths if n <= max_len)
    return {
        "total": len(lengths),
        "kept": kept,
        "dropped": len(lengths) - kept,
        "kept_fraction": (kept / len(lengths)) if lengths else 1.0,
        "max_len": max_len,
        "length_min": min(lengths) if lengths else 0,
        "length_max": max(lengths) if lengths else 0,
        "length_histogram": dict(
            sorted(histogram.items(), key=lambda kv: int(kv[0][1:].split(",")[0]))
        ),
    }


def filter_and_pack(
    examples: Iterable[TokenSequence], cfg: BuildConfig, out_path: str | Path
) -> dict:
    """Drop sequences longer than max_len, write the survivors to a binary
    dataset file, and return (and write alongside) the stats."""
    kept: list[TokenSequence] = []
    lengths: list[int] = []
    for seq in examples:
        lengths.append(len(seq))
        if len(seq) <= cfg.max_len:
            kept.append(seq)
    write_dataset(out_path, kept, cfg.max_len)
    stats = {**length_stats(lengths, cfg.max_len), "mode": cfg.mode}
    stats_path = stats_sidecar(out_path)
    stats_path.write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    return stats


def stats_sidecar(out_path: str | Path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.stem + ".stats.json")


def write_dataset(path: str | Path, sequences: Sequence[TokenSequence], max_len: int) -> None:
    """Binary layout: magic, u32 header length, JSON header {version,
    vocab_hash, max_len, count, kinds}, u32 lengths[count], then all ids as
    little-endian u16."""
    header = {
        "version": 1,
        "vocab_hash": vocab_hash(),
        "max_len": max_len,
        "count": len(sequences),
        "kinds": [seq.kind for seq in sequences],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_DATASET_MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        fh.write(np.asarray([len(seq) for seq in sequences], dtype="<u4").tobytes())
        for seq in sequences:
            fh.write(np.asarray(seq.ids, dtype="<u2").tobytes())


def load_dataset(path: str | Path) -> tuple[dict, list[TokenSequence]]:
    data = Path(path).read_bytes()
    if data[:4] != _DATASET_MAGIC:
        raise MalformedFile(f"{path}: not a dataset file")
    header_len = int.from_bytes(data[4:8], "little")
    header = json.loads(data[8 : 8 + header_len])
    if header.get("version") != 1:
        raise MalformedFile(f"{path}: unsupported dataset version {header.get('version')!r}")
    if header.get("vocab_hash") != vocab_hash():
        raise MalformedFile(f"{path}: vocabulary hash mismatch")
    count = header["count"]
    offset = 8 + header_len
    lengths = np.frombuffer(data, dtype="<u4", count=count, offset=offset)
    offset += 4 * count
    sequences = []
    kinds = header.get("kinds") or [MULTITRACK] * count
    for i, n in enumerate(lengths):
        ids = np.frombuffer(data, dtype="<u2", count=int(n), offset=offset)
        offset += 2 * int(n)
        sequences.append(TokenSequence(tuple(int(t) for t in ids), kinds[i]))
    return header, sequences
