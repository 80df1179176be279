"""Per-instrument note-density statistics and decile levels.

Every bar of every track contributes one onsets-per-bar count (zeros
included) to its instrument's distribution. Nine nearest-rank decile
boundaries per instrument bin a track's mean onsets-per-bar into levels
0-9; a mean equal to a boundary falls in the lower bin. Instruments never
seen in the corpus get all-zero boundaries.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .midi_core import DRUM, Piece, QuantizedTrack

N_INSTRUMENTS = DRUM + 1  # 128 programs + drums
N_BOUNDARIES = 9

Counts = dict[int, list[int]]


class DensityTable:
    """Nine nondecreasing decile boundaries per instrument id."""

    def __init__(self, boundaries: Mapping[int, Iterable[float]] | None = None):
        self.boundaries = np.zeros((N_INSTRUMENTS, N_BOUNDARIES), dtype=np.float64)
        for instrument, values in (boundaries or {}).items():
            row = np.asarray(list(values), dtype=np.float64)
            if row.shape != (N_BOUNDARIES,):
                raise ValueError(f"instrument {instrument}: expected {N_BOUNDARIES} boundaries")
            if np.any(np.diff(row) < 0):
                raise ValueError(f"instrument {instrument}: boundaries must be nondecreasing")
            self.boundaries[int(instrument)] = row

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DensityTable) and np.array_equal(self.boundaries, other.boundaries)

    def to_json(self) -> str:
        payload = {
            "version": 1,
            "instruments": {str(i): self.boundaries[i].tolist() for i in range(N_INSTRUMENTS)},
        }
        return json.dumps(payload, indent=None, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "DensityTable":
        payload = json.loads(text)
        if payload.get("version") != 1:
            raise ValueError(f"unsupported density table version {payload.get('version')!r}")
        return cls({int(k): v for k, v in payload["instruments"].items()})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DensityTable":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def accumulate(pieces: Iterable[Piece]) -> Counts:
    """Per-instrument multiset of onsets-per-bar over a corpus."""
    counts: Counts = {}
    for piece in pieces:
        for track in piece.tracks:
            bucket = counts.setdefault(track.instrument, [])
            for bar in track.bars:
                bucket.append(len(bar.events))
    return counts


def merge_counts(*parts: Counts) -> Counts:
    """Associative merge for sharded accumulation."""
    merged: Counts = {}
    for part in parts:
        for instrument, values in part.items():
            merged.setdefault(instrument, []).extend(values)
    return merged


def build_table(counts: Counts) -> DensityTable:
    """Boundary j (1-based) is the nearest-rank quantile at probability j/10."""
    table = DensityTable()
    probs = np.arange(1, N_BOUNDARIES + 1) / 10.0
    for instrument, values in counts.items():
        if not values:
            continue
        data = np.asarray(values, dtype=np.float64)
        table.boundaries[instrument] = np.quantile(data, probs, method="inverted_cdf")
    return table


def mean_onsets_per_bar(track: QuantizedTrack) -> float:
    return sum(len(bar.events) for bar in track.bars) / track.n_bars


def density_level(track: QuantizedTrack, table: DensityTable) -> int:
    """Number of boundaries strictly below the track's mean onsets-per-bar."""
    mean = mean_onsets_per_bar(track)
    return int(np.searchsorted(table.boundaries[track.instrument], mean, side="left"))


def assign_levels(piece: Piece, table: DensityTable) -> tuple[int, ...]:
    return tuple(density_level(track, table) for track in piece.tracks)
