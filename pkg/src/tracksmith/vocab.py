"""The 451-token alphabet and its serializations.

Layout (stable across runs, asserted by a hash of the mnemonic table):

    0..7      structural: PIECE_START TRACK_START TRACK_END BAR_START
              BAR_END FILL_PLACEHOLDER FILL_START FILL_END
    8..135    NOTE_ON:0..127
    136..263  NOTE_OFF:0..127
    264..311  TIME_SHIFT:1..48
    312..440  INSTRUMENT:0..127 and INSTRUMENT:DRUM
    441..450  DENSITY_LEVEL:0..9
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .errors import InvalidSequence
from .midi_core import BAR_SUBDIVISIONS, DRUM, N_PROGRAMS

PIECE_START = 0
TRACK_START = 1
TRACK_END = 2
BAR_START = 3
BAR_END = 4
FILL_PLACEHOLDER = 5
FILL_START = 6
FILL_END = 7

_STRUCTURAL = (
    "PIECE_START",
    "TRACK_START",
    "TRACK_END",
    "BAR_START",
    "BAR_END",
    "FILL_PLACEHOLDER",
    "FILL_START",
    "FILL_END",
)

NOTE_ON_BASE = 8
NOTE_OFF_BASE = NOTE_ON_BASE + 128
TIME_SHIFT_BASE = NOTE_OFF_BASE + 128
INSTRUMENT_BASE = TIME_SHIFT_BASE + BAR_SUBDIVISIONS
DENSITY_BASE = INSTRUMENT_BASE + N_PROGRAMS + 1
VOCAB_SIZE = DENSITY_BASE + 10  # 451

N_DENSITY_LEVELS = 10


def note_on(pitch: int) -> int:
    if not 0 <= pitch < 128:
        raise ValueError(f"pitch {pitch} out of range")
    return NOTE_ON_BASE + pitch


def note_off(pitch: int) -> int:
    if not 0 <= pitch < 128:
        raise ValueError(f"pitch {pitch} out of range")
    return NOTE_OFF_BASE + pitch


def time_shift(subdivisions: int) -> int:
    if not 1 <= subdivisions <= BAR_SUBDIVISIONS:
        raise ValueError(f"shift {subdivisions} out of range")
    return TIME_SHIFT_BASE + subdivisions - 1


def instrument(program: int) -> int:
    if not 0 <= program <= DRUM:
        raise ValueError(f"instrument {program} out of range")
    return INSTRUMENT_BASE + program


def density_level(level: int) -> int:
    if not 0 <= level < N_DENSITY_LEVELS:
        raise ValueError(f"density level {level} out of range")
    return DENSITY_BASE + level


def is_note_on(tid: int) -> bool:
    return NOTE_ON_BASE <= tid < NOTE_OFF_BASE


def is_note_off(tid: int) -> bool:
    return NOTE_OFF_BASE <= tid < TIME_SHIFT_BASE


def is_time_shift(tid: int) -> bool:
    return TIME_SHIFT_BASE <= tid < INSTRUMENT_BASE


def is_instrument(tid: int) -> bool:
    return INSTRUMENT_BASE <= tid < DENSITY_BASE


def is_density(tid: int) -> bool:
    return DENSITY_BASE <= tid < VOCAB_SIZE


def note_on_pitch(tid: int) -> int:
    return tid - NOTE_ON_BASE


def note_off_pitch(tid: int) -> int:
    return tid - NOTE_OFF_BASE


def shift_amount(tid: int) -> int:
    return tid - TIME_SHIFT_BASE + 1


def instrument_program(tid: int) -> int:
    return tid - INSTRUMENT_BASE


def density_value(tid: int) -> int:
    return tid - DENSITY_BASE


def mnemonic(tid: int) -> str:
    if not 0 <= tid < VOCAB_SIZE:
        raise ValueError(f"token id {tid} out of range")
    if tid < NOTE_ON_BASE:
        return _STRUCTURAL[tid]
    if is_note_on(tid):
        return f"NOTE_ON:{note_on_pitch(tid)}"
    if is_note_off(tid):
        return f"NOTE_OFF:{note_off_pitch(tid)}"
    if is_time_shift(tid):
        return f"TIME_SHIFT:{shift_amount(tid)}"
    if is_instrument(tid):
        program = instrument_program(tid)
        return "INSTRUMENT:DRUM" if program == DRUM else f"INSTRUMENT:{program}"
    return f"DENSITY_LEVEL:{density_value(tid)}"


_MNEMONICS = None


def mnemonic_table() -> list[str]:
    global _MNEMONICS
    if _MNEMONICS is None:
        _MNEMONICS = [mnemonic(tid) for tid in range(VOCAB_SIZE)]
    return _MNEMONICS


_BY_MNEMONIC: dict[str, int] | None = None


def parse_mnemonic(text: str) -> int:
    global _BY_MNEMONIC
    if _BY_MNEMONIC is None:
        _BY_MNEMONIC = {name: tid for tid, name in enumerate(mnemonic_table())}
    try:
        return _BY_MNEMONIC[text]
    except KeyError:
        raise ValueError(f"unknown token mnemonic {text!r}") from None


def vocab_hash() -> str:
    return hashlib.sha256("\n".join(mnemonic_table()).encode()).hexdigest()


MULTITRACK = "multitrack"
BARFILL = "barfill"


@dataclass(frozen=True)
class TokenSequence:
    """An immutable id sequence tagged with its representation kind."""

    ids: tuple[int, ...]
    kind: str = MULTITRACK

    def __post_init__(self) -> None:
        if self.kind not in (MULTITRACK, BARFILL):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        for position, tid in enumerate(self.ids):
            if not 0 <= tid < VOCAB_SIZE:
                raise InvalidSequence(position, f"token id {tid} out of range")

    def __len__(self) -> int:
        return len(self.ids)

    def to_text(self) -> str:
        """One mnemonic per line."""
        return "\n".join(mnemonic(tid) for tid in self.ids) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TokenSequence":
        """Whitespace-tolerant inverse of to_text; kind inferred from content."""
        ids = tuple(parse_mnemonic(word) for word in text.split())
        kind = BARFILL if any(FILL_PLACEHOLDER <= tid <= FILL_END for tid in ids) else MULTITRACK
        return cls(ids, kind)

    def to_json(self) -> str:
        return json.dumps({"version": 1, "kind": self.kind, "ids": list(self.ids)})

    @classmethod
    def from_json(cls, text: str) -> "TokenSequence":
        payload = json.loads(text)
        if payload.get("version") != 1:
            raise ValueError(f"unsupported token container version {payload.get('version')!r}")
        return cls(tuple(payload["ids"]), payload["kind"])
