"""Lossless encode/decode between pieces and token sequences.

The MultiTrack form nests bars in tracks and tracks in a piece; the BarFill
form replaces selected bars with FILL_PLACEHOLDER and appends their bodies
after the last TRACK_END, each wrapped in FILL_START/FILL_END, in the order
the placeholders appear. An empty selection degenerates to MultiTrack
token-for-token.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import vocab
from .errors import FillCountMismatch, InvalidPiece, InvalidSelection, InvalidSequence
from .midi_core import BAR_SUBDIVISIONS, Bar, NoteEvent, Piece, QuantizedTrack, check_piece

BarSelection = frozenset[tuple[int, int]]


@dataclass(frozen=True)
class Violation:
    position: int
    code: str
    message: str


def normalize_selection(piece: Piece, selection: Iterable[tuple[int, int]]) -> BarSelection:
    """Validate (track, bar) pairs against the piece bounds."""
    out = frozenset((int(t), int(b)) for t, b in selection)
    for track_index, bar_index in out:
        if not 0 <= track_index < piece.n_tracks:
            raise InvalidSelection(f"track index {track_index} out of range")
        if not 0 <= bar_index < piece.n_bars:
            raise InvalidSelection(f"bar index {bar_index} out of range")
    return out


def _check_densities(piece: Piece, density_levels: Sequence[int]) -> None:
    if len(density_levels) != piece.n_tracks:
        raise InvalidPiece(
            f"{len(density_levels)} density levels for {piece.n_tracks} tracks"
        )
    for level in density_levels:
        if not 0 <= level < vocab.N_DENSITY_LEVELS:
            raise InvalidPiece(f"density level {level} out of range")


def bar_body(bar: Bar) -> list[int]:
    """Token ids for a bar interior: time-ordered events with a cursor that
    advances by merged TIME_SHIFTs and pads to 48; at equal times NOTE_OFFs
    come before NOTE_ONs, each in ascending pitch."""
    boundaries: list[tuple[int, int, int]] = []  # (time, off=0/on=1, pitch)
    for event in bar.events:
        boundaries.append((event.onset, 1, event.pitch))
        boundaries.append((event.offset, 0, event.pitch))
    boundaries.sort()
    ids: list[int] = []
    cursor = 0
    for time, is_on, pitch in boundaries:
        if time > cursor:
            ids.append(vocab.time_shift(time - cursor))
            cursor = time
        ids.append(vocab.note_on(pitch) if is_on else vocab.note_off(pitch))
    if cursor < BAR_SUBDIVISIONS:
        ids.append(vocab.time_shift(BAR_SUBDIVISIONS - cursor))
    return ids


def _track_header(track: QuantizedTrack, level: int) -> list[int]:
    return [vocab.TRACK_START, vocab.instrument(track.instrument), vocab.density_level(level)]


def encode_multitrack(piece: Piece, density_levels: Sequence[int]) -> vocab.TokenSequence:
    """PIECE_START, then per track: header, bars, TRACK_END. No end-of-piece
    token exists; consumers stop after the n-th TRACK_END."""
    try:
        check_piece(piece)
    except InvalidPiece:
        raise
    except ValueError as exc:
        raise InvalidPiece(str(exc)) from exc
    _check_densities(piece, density_levels)
    ids: list[int] = [vocab.PIECE_START]
    for track, level in zip(piece.tracks, density_levels):
        ids += _track_header(track, level)
        for bar in track.bars:
            ids.append(vocab.BAR_START)
            ids += bar_body(bar)
            ids.append(vocab.BAR_END)
        ids.append(vocab.TRACK_END)
    return vocab.TokenSequence(tuple(ids), vocab.MULTITRACK)


def encode_barfill(
    piece: Piece,
    selection: Iterable[tuple[int, int]],
    density_levels: Sequence[int],
) -> vocab.TokenSequence:
    check_piece(piece)
    _check_densities(piece, density_levels)
    selected = normalize_selection(piece, selection)
    ids: list[int] = [vocab.PIECE_START]
    fills: list[list[int]] = []
    for track_index, (track, level) in enumerate(zip(piece.tracks, density_levels)):
        ids += _track_header(track, level)
        for bar_index, bar in enumerate(track.bars):
            if (track_index, bar_index) in selected:
                ids.append(vocab.FILL_PLACEHOLDER)
                fills.append(bar_body(bar))
            else:
                ids.append(vocab.BAR_START)
                ids += bar_body(bar)
                ids.append(vocab.BAR_END)
        ids.append(vocab.TRACK_END)
    for body in fills:
        ids.append(vocab.FILL_START)
        ids += body
        ids.append(vocab.FILL_END)
    return vocab.TokenSequence(tuple(ids), vocab.BARFILL)


def strip_fills(seq: vocab.TokenSequence) -> vocab.TokenSequence:
    """A BarFill sequence without its fill suffix: placeholders stay, bodies
    go. This is the conditioning context for fill generation."""
    last_track_end = -1
    for position, tid in enumerate(seq.ids):
        if tid == vocab.TRACK_END:
            last_track_end = position
    if last_track_end < 0:
        raise InvalidSequence(0, "no TRACK_END token")
    return vocab.TokenSequence(seq.ids[: last_track_end + 1], vocab.BARFILL)


def reinsert_fills(seq: vocab.TokenSequence) -> vocab.TokenSequence:
    """Splice each FILL_START..FILL_END body back over its placeholder,
    re-wrapped as BAR_START..BAR_END, and drop the suffix."""
    ids = list(seq.ids)
    last_track_end = -1
    for position, tid in enumerate(ids):
        if tid == vocab.TRACK_END:
            last_track_end = position
    if last_track_end < 0:
        raise InvalidSequence(0, "no TRACK_END token")
    prefix, suffix = ids[: last_track_end + 1], ids[last_track_end + 1 :]

    bodies: list[list[int]] = []
    position = last_track_end + 1
    cursor = 0
    while cursor < len(suffix):
        if suffix[cursor] != vocab.FILL_START:
            raise InvalidSequence(position + cursor, "expected FILL_START in fill suffix")
        try:
            end = suffix.index(vocab.FILL_END, cursor + 1)
        except ValueError:
            raise InvalidSequence(position + cursor, "unterminated fill group") from None
        bodies.append(suffix[cursor + 1 : end])
        cursor = end + 1

    placeholders = sum(1 for tid in prefix if tid == vocab.FILL_PLACEHOLDER)
    if placeholders != len(bodies):
        raise FillCountMismatch(
            f"{placeholders} placeholders but {len(bodies)} fill groups"
        )
    out: list[int] = []
    fill_index = 0
    for tid in prefix:
        if tid == vocab.FILL_PLACEHOLDER:
            out.append(vocab.BAR_START)
            out += bodies[fill_index]
            out.append(vocab.BAR_END)
            fill_index += 1
        else:
            out.append(tid)
    return vocab.TokenSequence(tuple(out), vocab.MULTITRACK)


class _Walker:
    """Single-pass grammar walk shared by validate (collect violations) and
    decode (strict: raise at the first violation)."""

    def __init__(self, ids: Sequence[int], strict: bool, allow_fills: bool):
        self.ids = ids
        self.strict = strict
        self.allow_fills = allow_fills
        self.violations: list[Violation] = []
        self.tracks: list[tuple[int, int, list[tuple[NoteEvent, ...] | None]]] = []
        self.fills: list[tuple[NoteEvent, ...]] = []
        self.aborted = False

    def flag(self, position: int, code: str, message: str) -> None:
        if self.strict:
            raise InvalidSequence(position, message)
        self.violations.append(Violation(position, code, message))

    def abort(self, position: int, code: str, message: str) -> None:
        self.flag(position, code, message)
        self.aborted = True

    def run(self) -> None:
        ids = self.ids
        if not ids or ids[0] != vocab.PIECE_START:
            self.abort(0, "missing_piece_start", "sequence must begin with PIECE_START")
            return
        position = 1
        placeholder_count = 0
        while position < len(ids) and not self.aborted:
            tid = ids[position]
            if tid == vocab.TRACK_START:
                position, placeholders = self._track(position)
                placeholder_count += placeholders
            elif tid == vocab.FILL_START and self.allow_fills:
                break
            else:
                self.abort(position, "unexpected_token", f"expected TRACK_START, got {vocab.mnemonic(tid)}")
                return
        if self.aborted:
            return
        if not self.tracks:
            self.abort(len(ids), "no_tracks", "piece contains no tracks")
            return
        bar_counts = {len(bars) for _, _, bars in self.tracks}
        if len(bar_counts) > 1:
            self.flag(
                len(ids) - 1,
                "unequal_bar_counts",
                f"tracks disagree on bar count: {sorted(bar_counts)}",
            )
        if position < len(ids):
            self._suffix(position, placeholder_count)
        elif placeholder_count:
            self.flag(len(ids) - 1, "fill_count_mismatch",
                      f"{placeholder_count} placeholders but no fill suffix")

    def _track(self, position: int) -> tuple[int, int]:
        ids = self.ids
        position += 1  # past TRACK_START
        if position >= len(ids) or not vocab.is_instrument(ids[position]):
            self.abort(position, "missing_instrument", "INSTRUMENT must follow TRACK_START")
            return position, 0
        instrument = vocab.instrument_program(ids[position])
        position += 1
        if position >= len(ids) or not vocab.is_density(ids[position]):
            self.abort(position, "missing_density", "DENSITY_LEVEL must follow INSTRUMENT")
            return position, 0
        level = vocab.density_value(ids[position])
        position += 1
        bars: list[tuple[NoteEvent, ...] | None] = []
        placeholders = 0
        while position < len(ids):
            tid = ids[position]
            if tid == vocab.BAR_START:
                events, position = self._body(position + 1, vocab.BAR_END)
                bars.append(events)
            elif tid == vocab.FILL_PLACEHOLDER:
                if not self.allow_fills:
                    self.abort(position, "unexpected_token",
                               "FILL_PLACEHOLDER outside barfill sequence")
                    return position, placeholders
                bars.append(None)
                placeholders += 1
                position += 1
            elif tid == vocab.TRACK_END:
                if not bars:
                    self.flag(position, "empty_track", "track contains no bars")
                self.tracks.append((instrument, level, bars))
                return position + 1, placeholders
            else:
                self.abort(position, "unexpected_token",
                           f"expected bar or TRACK_END, got {vocab.mnemonic(tid)}")
                return position, placeholders
            if self.aborted:
                return position, placeholders
        self.abort(len(ids), "truncated", "sequence ends inside a track")
        return len(ids), placeholders

    def _body(self, position: int, end_token: int) -> tuple[tuple[NoteEvent, ...], int]:
        """Parse bar/fill interior up to and including end_token; returns
        (events, next position)."""
        ids = self.ids
        time = 0
        open_notes: dict[int, int] = {}
        events: list[NoteEvent] = []
        end_name = vocab.mnemonic(end_token)
        while position < len(ids):
            tid = ids[position]
            if tid == end_token:
                if time != BAR_SUBDIVISIONS:
                    state = "underfull" if time < BAR_SUBDIVISIONS else "overfull"
                    self.flag(position, f"bar_{state}",
                              f"bar {state}: cumulative TIME_SHIFT {time} != {BAR_SUBDIVISIONS}")
                for pitch, onset in sorted(open_notes.items()):
                    if onset < BAR_SUBDIVISIONS:
                        events.append(NoteEvent(onset, pitch, BAR_SUBDIVISIONS))
                events.sort()
                return tuple(events), position + 1
            if vocab.is_time_shift(tid):
                time += vocab.shift_amount(tid)
                if time > BAR_SUBDIVISIONS:
                    self.flag(position, "bar_overfull",
                              f"cumulative TIME_SHIFT {time} exceeds {BAR_SUBDIVISIONS}")
                    time = BAR_SUBDIVISIONS
            elif vocab.is_note_on(tid):
                pitch = vocab.note_on_pitch(tid)
                if time >= BAR_SUBDIVISIONS:
                    self.flag(position, "note_on_at_bar_end", f"NOTE_ON:{pitch} at subdivision 48")
                elif pitch in open_notes:
                    self.flag(position, "duplicate_note_on", f"NOTE_ON:{pitch} while pitch is open")
                    if open_notes[pitch] < time:
                        events.append(NoteEvent(open_notes[pitch], pitch, time))
                    open_notes[pitch] = time
                else:
                    open_notes[pitch] = time
            elif vocab.is_note_off(tid):
                pitch = vocab.note_off_pitch(tid)
                if pitch not in open_notes:
                    self.flag(position, "unmatched_note_off", f"NOTE_OFF:{pitch} with no open note")
                else:
                    onset = open_notes.pop(pitch)
                    if onset == time:
                        self.flag(position, "zero_length_note", f"NOTE_OFF:{pitch} at its own onset")
                    else:
                        events.append(NoteEvent(onset, pitch, time))
            else:
                self.abort(position, "unexpected_token",
                           f"expected note event, TIME_SHIFT, or {end_name}, got {vocab.mnemonic(tid)}")
                return tuple(events), position
            position += 1
        self.abort(len(ids), "truncated", f"sequence ends before {end_name}")
        return tuple(events), position

    def _suffix(self, position: int, placeholder_count: int) -> None:
        ids = self.ids
        groups = 0
        while position < len(ids) and not self.aborted:
            if ids[position] != vocab.FILL_START:
                self.abort(position, "trailing_tokens",
                           f"expected FILL_START, got {vocab.mnemonic(ids[position])}")
                return
            events, position = self._body(position + 1, vocab.FILL_END)
            self.fills.append(events)
            groups += 1
        if groups != placeholder_count:
            self.flag(min(position, len(ids) - 1), "fill_count_mismatch",
                      f"{placeholder_count} placeholders but {groups} fill groups")


def validate(seq: vocab.TokenSequence) -> list[Violation]:
    """Empty list when the sequence parses cleanly; otherwise the violations
    found (scanning stops at the first structural desync)."""
    walker = _Walker(seq.ids, strict=False, allow_fills=True)
    walker.run()
    return walker.violations


def decode(seq: vocab.TokenSequence) -> tuple[Piece, tuple[int, ...]]:
    """Strict inverse of encode_multitrack. Unclosed notes at a bar's end are
    closed at subdivision 48; any grammar breach raises InvalidSequence with
    position and reason. BarFill sequences must go through reinsert_fills
    first (placeholders are rejected here)."""
    walker = _Walker(seq.ids, strict=True, allow_fills=False)
    walker.run()
    tracks = []
    levels = []
    for instrument, level, bars in walker.tracks:
        tracks.append(QuantizedTrack(instrument, tuple(Bar(events) for events in bars)))
        levels.append(level)
    return Piece(tuple(tracks)), tuple(levels)
