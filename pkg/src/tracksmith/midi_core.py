"""Quantized multi-track score model and the MIDI <-> piece pipeline.

A piece is a list of tracks; a track is one instrument's bars; a bar spans
exactly 48 subdivisions (12 per beat, 4 beats). Tracks are extracted from a
MIDI file per (instrument, channel, chunk) triple, quantized onto the
subdivision grid, and padded to a common bar count. Only 4/4 bars are
representable; content in other meters is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import smf
from .errors import EmptyPiece, InvalidPiece, NonQuadrupleMeter

SUBDIVISIONS_PER_BEAT = 12
BEATS_PER_BAR = 4
BAR_SUBDIVISIONS = SUBDIVISIONS_PER_BEAT * BEATS_PER_BAR  # 48
N_PROGRAMS = 128
DRUM = 128  # sentinel instrument for channel-10 percussion, distinct from all programs
DRUM_CHANNEL = 9


@dataclass(frozen=True, order=True)
class NoteEvent:
    """One note inside a bar: onset/offset in subdivisions, onset < offset."""

    onset: int
    pitch: int
    offset: int

    def __post_init__(self) -> None:
        if not 0 <= self.pitch < 128:
            raise ValueError(f"pitch {self.pitch} out of range")
        if not 0 <= self.onset < self.offset <= BAR_SUBDIVISIONS:
            raise ValueError(f"bad note span [{self.onset}, {self.offset})")


@dataclass(frozen=True)
class Bar:
    events: tuple[NoteEvent, ...] = ()


@dataclass(frozen=True)
class QuantizedTrack:
    instrument: int  # MIDI program 0-127, or DRUM
    bars: tuple[Bar, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.instrument <= DRUM:
            raise ValueError(f"instrument {self.instrument} out of range")

    @property
    def n_bars(self) -> int:
        return len(self.bars)


@dataclass(frozen=True)
class Piece:
    tracks: tuple[QuantizedTrack, ...]

    @property
    def n_bars(self) -> int:
        return self.tracks[0].n_bars if self.tracks else 0

    @property
    def n_tracks(self) -> int:
        return len(self.tracks)


def check_piece(piece: Piece) -> None:
    """Raise InvalidPiece unless every structural invariant holds."""
    if not piece.tracks:
        raise InvalidPiece("piece has no tracks")
    n_bars = piece.tracks[0].n_bars
    if n_bars == 0:
        raise InvalidPiece("piece has no bars")
    for ti, track in enumerate(piece.tracks):
        if track.n_bars != n_bars:
            raise InvalidPiece(f"track {ti} has {track.n_bars} bars, expected {n_bars}")
        for bi, bar in enumerate(track.bars):
            seen: set[tuple[int, int]] = set()
            last_off: dict[int, int] = {}
            for event in sorted(bar.events):
                key = (event.pitch, event.onset)
                if key in seen:
                    raise InvalidPiece(f"track {ti} bar {bi}: duplicate (pitch, onset) {key}")
                seen.add(key)
                if event.onset < last_off.get(event.pitch, 0):
                    raise InvalidPiece(
                        f"track {ti} bar {bi}: overlapping pitch {event.pitch} at {event.onset}"
                    )
                last_off[event.pitch] = event.offset


def canonical_bar(events: Iterable[NoteEvent]) -> Bar:
    """Sort by (onset, pitch), drop (pitch, onset) duplicates keeping the
    longest, and truncate same-pitch overlaps at the next onset (retrigger)."""
    best: dict[tuple[int, int], NoteEvent] = {}
    for event in events:
        key = (event.pitch, event.onset)
        kept = best.get(key)
        if kept is None or event.offset > kept.offset:
            best[key] = event
    by_pitch: dict[int, list[NoteEvent]] = {}
    for event in best.values():
        by_pitch.setdefault(event.pitch, []).append(event)
    out: list[NoteEvent] = []
    for pitch, notes in by_pitch.items():
        notes.sort()
        for i, event in enumerate(notes):
            if i + 1 < len(notes) and notes[i + 1].onset < event.offset:
                event = NoteEvent(event.onset, pitch, notes[i + 1].onset)
            out.append(event)
    return Bar(tuple(sorted(out)))


# --- raw (tick-level) tracks ---


@dataclass(frozen=True)
class RawNote:
    pitch: int
    onset_tick: int
    offset_tick: int


@dataclass(frozen=True)
class RawTrack:
    instrument: int
    channel: int
    chunk_index: int
    notes: tuple[RawNote, ...]


@dataclass(frozen=True)
class BarSpan:
    """One bar of the tick timeline, carrying its governing time signature."""

    start: int
    end: int
    numerator: int
    denominator: int

    @property
    def is_four_four(self) -> bool:
        return self.numerator == 4 and self.denominator == 4


def extract_tracks(ir: smf.MidiFileIR) -> list[RawTrack]:
    """Partition note messages into per-(instrument, channel, chunk) tracks.

    The program of a channel starts at 0 and follows program_change messages;
    channel 9 maps to the DRUM instrument regardless of program. A note_on
    retriggers (truncates) a still-open note of the same pitch; pairing is
    FIFO within a triple. Dangling notes close at the chunk's last tick.
    """
    tracks: dict[tuple[int, int, int], list[RawNote]] = {}
    for chunk_index, chunk in enumerate(ir.track_chunks):
        program = [0] * 16
        open_notes: dict[tuple[int, int, int, int], int] = {}
        last_tick = chunk[-1].tick if chunk else 0
        for msg in chunk:
            if msg.kind == smf.PROGRAM_CHANGE:
                program[msg.channel] = msg.program
                continue
            if msg.kind not in (smf.NOTE_ON, smf.NOTE_OFF):
                continue
            instrument = DRUM if msg.channel == DRUM_CHANNEL else program[msg.channel]
            triple = (instrument, msg.channel, chunk_index)
            key = (instrument, msg.channel, chunk_index, msg.pitch)
            if msg.kind == smf.NOTE_ON:
                if key in open_notes:
                    _close(tracks, triple, msg.pitch, open_notes.pop(key), msg.tick)
                open_notes[key] = msg.tick
                tracks.setdefault(triple, [])
            elif key in open_notes:
                _close(tracks, triple, msg.pitch, open_notes.pop(key), msg.tick)
            # note_off with no open note is dropped
        for (instrument, channel, _, pitch), onset in open_notes.items():
            _close(tracks, (instrument, channel, chunk_index), pitch, onset, last_tick)
    out = []
    for triple, notes in tracks.items():
        if not notes:
            continue
        notes.sort(key=lambda n: (n.onset_tick, n.pitch))
        instrument, channel, chunk_index = triple
        out.append(RawTrack(instrument, channel, chunk_index, tuple(notes)))
    out.sort(key=lambda t: (t.chunk_index, t.notes[0].onset_tick, t.channel, t.instrument))
    return out


def _close(
    tracks: dict[tuple[int, int, int], list[RawNote]],
    triple: tuple[int, int, int],
    pitch: int,
    onset: int,
    offset: int,
) -> None:
    tracks.setdefault(triple, []).append(RawNote(pitch, onset, max(offset, onset + 1)))


def bar_spans(ir: smf.MidiFileIR) -> list[BarSpan]:
    """Lay bars over the tick timeline from the file's time signatures.

    Default meter is 4/4. Each signature change starts a fresh bar; the bars
    of the last region extend to cover the final message. A partial bar
    stranded before a mid-region change is emitted with its (non-bar-length)
    span so callers can see and drop it.
    """
    tpb = ir.ticks_per_beat
    changes: dict[int, tuple[int, int]] = {}
    max_tick = 0
    for chunk in ir.track_chunks:
        for msg in chunk:
            max_tick = max(max_tick, msg.tick)
            if msg.kind == smf.TIME_SIGNATURE and msg.denominator > 0:
                changes[msg.tick] = (msg.numerator, msg.denominator)
    if 0 not in changes:
        changes[0] = (4, 4)
    ticks = sorted(t for t in changes if t <= max_tick)
    spans: list[BarSpan] = []
    for i, start in enumerate(ticks):
        numerator, denominator = changes[start]
        end = ticks[i + 1] if i + 1 < len(ticks) else None
        bar_len = numerator * 4 * tpb // denominator
        if bar_len <= 0 or numerator * 4 * tpb % denominator:
            if end is not None or start < max_tick:
                spans.append(BarSpan(start, end if end is not None else max_tick, numerator, denominator))
            continue
        cursor = start
        region_end = end if end is not None else max(max_tick, start + bar_len)
        while cursor < region_end:
            bar_end = min(cursor + bar_len, region_end) if end is not None else cursor + bar_len
            spans.append(BarSpan(cursor, bar_end, numerator, denominator))
            cursor = bar_end
    return spans


def four_four_spans(ir: smf.MidiFileIR) -> list[BarSpan]:
    """Only the full-length 4/4 bars of the timeline, in order."""
    full = 4 * ir.ticks_per_beat
    return [s for s in bar_spans(ir) if s.is_four_four and s.end - s.start == full]


def _snap(offset_ticks: int, tpb: int) -> int:
    # round-half-up of offset_ticks * 12 / tpb
    return (offset_ticks * 2 * SUBDIVISIONS_PER_BEAT + tpb) // (2 * tpb)


def quantize(raw: RawTrack, ticks_per_beat: int, bars: Sequence[BarSpan]) -> QuantizedTrack:
    """Snap a raw track onto the 48-per-bar subdivision grid.

    Ties round up; a note that snaps to zero length keeps one subdivision;
    notes crossing bar boundaries are split per bar. Notes outside the given
    bars are clipped to them. Raises NonQuadrupleMeter if any bar is not a
    full 4/4 bar.
    """
    full = BEATS_PER_BAR * ticks_per_beat
    for span in bars:
        if not span.is_four_four or span.end - span.start != full:
            raise NonQuadrupleMeter(
                f"bar [{span.start}, {span.end}) is {span.numerator}/{span.denominator}"
            )
    bar_events: list[list[NoteEvent]] = [[] for _ in bars]
    for first, count in _contiguous_runs(bars):
        region_start = bars[first].start
        region_end = bars[first + count - 1].end
        limit = count * BAR_SUBDIVISIONS
        for note in raw.notes:
            onset = max(note.onset_tick, region_start)
            offset = min(note.offset_tick, region_end)
            if offset <= onset:
                continue
            on_sub = _snap(onset - region_start, ticks_per_beat)
            off_sub = min(_snap(offset - region_start, ticks_per_beat), limit)
            if on_sub >= limit:
                continue
            if off_sub <= on_sub:
                off_sub = on_sub + 1
            for bar_offset in range(on_sub // BAR_SUBDIVISIONS, (off_sub - 1) // BAR_SUBDIVISIONS + 1):
                lo = bar_offset * BAR_SUBDIVISIONS
                bar_events[first + bar_offset].append(
                    NoteEvent(
                        onset=max(on_sub - lo, 0),
                        pitch=note.pitch,
                        offset=min(off_sub - lo, BAR_SUBDIVISIONS),
                    )
                )
    return QuantizedTrack(raw.instrument, tuple(canonical_bar(events) for events in bar_events))


def _contiguous_runs(bars: Sequence[BarSpan]) -> list[tuple[int, int]]:
    runs: list[tuple[int, int]] = []
    i = 0
    while i < len(bars):
        j = i + 1
        while j < len(bars) and bars[j].start == bars[j - 1].end:
            j += 1
        runs.append((i, j - i))
        i = j
    return runs


def assemble_piece(tracks: Sequence[QuantizedTrack]) -> Piece:
    """Pad all tracks with trailing empty bars to a common bar count."""
    if not tracks:
        raise EmptyPiece("no tracks to assemble")
    n_bars = max(t.n_bars for t in tracks)
    if n_bars == 0:
        raise EmptyPiece("no bars to assemble")
    padded = [
        t if t.n_bars == n_bars else QuantizedTrack(t.instrument, t.bars + (Bar(),) * (n_bars - t.n_bars))
        for t in tracks
    ]
    return Piece(tuple(padded))


def piece_from_midi(data: bytes) -> Piece:
    """Parse, extract, quantize, and assemble in one step.

    Raises EmptyPiece when the file has no 4/4 bars or no notes inside them.
    """
    ir = parse_and_check(data)
    spans = four_four_spans(ir)
    if not spans:
        raise EmptyPiece("file has no full 4/4 bars")
    quantized = [quantize(raw, ir.ticks_per_beat, spans) for raw in extract_tracks(ir)]
    keep = [t for t in quantized if any(bar.events for bar in t.bars)]
    if not keep:
        raise EmptyPiece("no notes fall inside 4/4 bars")
    return assemble_piece(keep)


def parse_and_check(data: bytes) -> smf.MidiFileIR:
    return smf.parse_midi(data)


EXPORT_TICKS_PER_BEAT = 480  # divisible by 12: subdivisions land on exact ticks
EXPORT_TEMPO_US = 500_000  # 120 BPM
EXPORT_VELOCITY = 96


def piece_to_midi(piece: Piece) -> bytes:
    """Render a piece as a Type 1 SMF: one meta chunk plus one chunk per track.

    Tempo is fixed at 120 BPM and velocity at 96 (the representation carries
    neither). Drum tracks go to channel 9; other tracks take the remaining
    channels round-robin. Segments of one pitch that abut across a bar
    boundary are merged back into a single sustained note.
    """
    check_piece(piece)
    tpb = EXPORT_TICKS_PER_BEAT
    sub = tpb // SUBDIVISIONS_PER_BEAT
    total_ticks = piece.n_bars * BAR_SUBDIVISIONS * sub
    meta = smf.TrackChunkBuilder()
    meta.add_time_signature(0, 4, 4)
    meta.add_tempo(0, EXPORT_TEMPO_US)
    chunks = [meta.build(end_tick=total_ticks)]
    melodic_channels = [c for c in range(16) if c != DRUM_CHANNEL]
    melodic_seen = 0
    for track in piece.tracks:
        if track.instrument == DRUM:
            channel = DRUM_CHANNEL
        else:
            channel = melodic_channels[melodic_seen % len(melodic_channels)]
            melodic_seen += 1
        builder = smf.TrackChunkBuilder()
        if track.instrument != DRUM:
            builder.add_program_change(0, channel, track.instrument)
        for pitch, onset, offset in _merged_notes(track):
            builder.add_note_on(onset * sub, channel, pitch, EXPORT_VELOCITY)
            builder.add_note_off(offset * sub, channel, pitch)
        chunks.append(builder.build(end_tick=total_ticks))
    return smf.write_smf(1, tpb, chunks)


def _merged_notes(track: QuantizedTrack) -> list[tuple[int, int, int]]:
    """Track events in absolute subdivisions, merging boundary-abutting segments."""
    notes: list[tuple[int, int, int]] = []  # (pitch, onset, offset), absolute
    open_ends: dict[int, int] = {}  # pitch -> index into notes of a segment ending at a bar line
    for bar_index, bar in enumerate(track.bars):
        base = bar_index * BAR_SUBDIVISIONS
        next_open: dict[int, int] = {}
        for event in sorted(bar.events):
            onset = base + event.onset
            offset = base + event.offset
            prev = open_ends.get(event.pitch)
            if prev is not None and event.onset == 0 and notes[prev][2] == onset:
                notes[prev] = (event.pitch, notes[prev][1], offset)
                index = prev
            else:
                notes.append((event.pitch, onset, offset))
                index = len(notes) - 1
            if event.offset == BAR_SUBDIVISIONS:
                next_open[event.pitch] = index
        open_ends = next_open
    return notes
