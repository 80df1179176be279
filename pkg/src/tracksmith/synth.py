"""Deterministic synthetic pieces and corpora.

Generates canonical pieces (sorted events, unique (pitch, onset), no
same-pitch overlap within a bar) for fuzz tests, demo corpora, and the
overfit benchmark. Everything is driven by an explicit random.Random so a
seed pins the corpus bit-for-bit.
"""

from __future__ import annotations

import random
from pathlib import Path

from .midi_core import (
    BAR_SUBDIVISIONS,
    DRUM,
    Bar,
    NoteEvent,
    Piece,
    QuantizedTrack,
    piece_to_midi,
)


def random_bar(
    rng: random.Random,
    max_notes: int = 6,
    pitch_lo: int = 36,
    pitch_hi: int = 96,
    min_notes: int = 0,
) -> Bar:
    events: list[NoteEvent] = []
    for pitch in rng.sample(range(pitch_lo, pitch_hi), k=rng.randint(min_notes, max_notes)):
        onsets = sorted(rng.sample(range(BAR_SUBDIVISIONS), k=rng.randint(1, 2)))
        for i, onset in enumerate(onsets):
            limit = onsets[i + 1] if i + 1 < len(onsets) else BAR_SUBDIVISIONS
            events.append(NoteEvent(onset, pitch, min(onset + rng.randint(1, 24), limit)))
    return Bar(tuple(sorted(events)))


def random_piece(
    rng: random.Random,
    max_tracks: int = 4,
    max_bars: int = 4,
    max_notes_per_bar: int = 6,
    allow_drums: bool = True,
    ensure_nonempty: bool = False,
) -> Piece:
    """A canonical random piece. With ensure_nonempty, every track gets at
    least one note (required for exact MIDI export/import equality: silent
    tracks leave no trace in a MIDI file)."""
    n_tracks = rng.randint(1, max_tracks)
    n_bars = rng.randint(1, max_bars)
    tracks = []
    programs = rng.sample(range(128), k=n_tracks)
    for t in range(n_tracks):
        instrument = DRUM if allow_drums and rng.random() < 0.15 else programs[t]
        bars = [random_bar(rng, max_notes_per_bar) for _ in range(n_bars)]
        if ensure_nonempty and not any(bar.events for bar in bars):
            bars[rng.randrange(n_bars)] = random_bar(rng, max_notes_per_bar, min_notes=1)
        tracks.append(QuantizedTrack(instrument, tuple(bars)))
    return Piece(tuple(tracks))


def write_corpus(
    directory: str | Path,
    count: int = 48,
    seed: int = 2024,
    max_tracks: int = 4,
    max_bars: int = 8,
) -> list[Path]:
    """Render `count` random pieces as MIDI files (corpus_000.mid, ...)."""
    rng = random.Random(seed)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        piece = random_piece(rng, max_tracks=max_tracks, max_bars=max_bars)
        path = directory / f"corpus_{i:03d}.mid"
        path.write_bytes(piece_to_midi(piece))
        paths.append(path)
    return paths


def overfit_corpus(seed: int = 7, count: int = 32) -> list[Piece]:
    """Small distinct pieces for memorization benchmarks: two tracks of two
    bars each, instruments unique across the corpus so sequences diverge
    right after the first track header."""
    rng = random.Random(seed)
    pieces = []
    for i in range(count):
        tracks = []
        for j in range(2):
            instrument = (2 * i + j) % 128
            bars = tuple(random_bar(rng, max_notes=3, pitch_lo=48, pitch_hi=84) for _ in range(2))
            tracks.append(QuantizedTrack(instrument, bars))
        pieces.append(Piece(tuple(tracks)))
    return pieces
