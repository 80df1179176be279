"""Binary Standard MIDI File (SMF) reading and writing.

Reads Type 0 and Type 1 files into a flat intermediate representation of
absolute-tick messages (running status and delta times resolved, note_on
with velocity 0 normalized to note_off). Type 2 files and SMPTE time
divisions are rejected. The writer emits conformant Type 0/1 bytes and is
the package's only MIDI output path.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .errors import MalformedFile, UnsupportedFormat

NOTE_ON = "note_on"
NOTE_OFF = "note_off"
PROGRAM_CHANGE = "program_change"
TIME_SIGNATURE = "time_signature"
OTHER = "other"


@dataclass(frozen=True)
class MidiMessage:
    """One decoded message with absolute tick timing.

    ``channel`` is meaningful for channel messages, ``pitch`` for notes,
    ``program`` for program changes, and ``numerator``/``denominator`` for
    time signatures; unused fields stay 0.
    """

    kind: str
    tick: int
    channel: int = 0
    pitch: int = 0
    program: int = 0
    numerator: int = 0
    denominator: int = 0


@dataclass(frozen=True)
class MidiFileIR:
    format: int
    ticks_per_beat: int
    track_chunks: tuple[tuple[MidiMessage, ...], ...]


def ir_to_json(ir: MidiFileIR) -> dict:
    """JSON-friendly dump of the IR for debugging."""
    return {
        "format": ir.format,
        "ticks_per_beat": ir.ticks_per_beat,
        "track_chunks": [[asdict(m) for m in chunk] for chunk in ir.track_chunks],
    }


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedFile("unexpected end of file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.read(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.read(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self.read(4), "big")

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8()
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MalformedFile("variable-length quantity longer than 4 bytes")

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.data)


_CHANNEL_DATA_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def parse_midi(data: bytes) -> MidiFileIR:
    """Decode an SMF byte stream into absolute-tick messages.

    Raises MalformedFile on structural damage and UnsupportedFormat for
    Type 2 files or SMPTE time divisions.
    """
    r = _Reader(data)
    if r.read(4) != b"MThd":
        raise MalformedFile("missing MThd header")
    header_len = r.u32()
    if header_len < 6:
        raise MalformedFile(f"header length {header_len} < 6")
    fmt = r.u16()
    ntrks = r.u16()
    division = r.u16()
    r.read(header_len - 6)
    if fmt == 2:
        raise UnsupportedFormat("Type 2 MIDI files are not supported")
    if fmt not in (0, 1):
        raise MalformedFile(f"unknown SMF format {fmt}")
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if division == 0:
        raise MalformedFile("zero ticks per beat")
    if fmt == 0 and ntrks != 1:
        raise MalformedFile(f"Type 0 file declares {ntrks} tracks")

    chunks: list[tuple[MidiMessage, ...]] = []
    while not r.exhausted and len(chunks) < ntrks:
        chunk_type = r.read(4)
        chunk_len = r.u32()
        body = r.read(chunk_len)
        if chunk_type != b"MTrk":
            continue  # alien chunks are ignored per the standard
        chunks.append(tuple(_parse_track(body)))
    if len(chunks) != ntrks:
        raise MalformedFile(f"header declares {ntrks} tracks, found {len(chunks)}")
    return MidiFileIR(format=fmt, ticks_per_beat=division, track_chunks=tuple(chunks))


def _parse_track(body: bytes) -> list[MidiMessage]:
    r = _Reader(body)
    messages: list[MidiMessage] = []
    tick = 0
    running_status: int | None = None
    while not r.exhausted:
        tick += r.varlen()
        status = r.u8()
        if status < 0x80:
            if running_status is None:
                raise MalformedFile("data byte with no running status")
            r.pos -= 1
            status = running_status
        if status < 0xF0:
            running_status = status
            kind = status & 0xF0
            channel = status & 0x0F
            payload = r.read(_CHANNEL_DATA_LEN[kind])
            if any(b & 0x80 for b in payload):
                raise MalformedFile("data byte with high bit set")
            messages.append(_channel_message(kind, channel, payload, tick))
        elif status in (0xF0, 0xF7):
            running_status = None
            r.read(r.varlen())
            messages.append(MidiMessage(kind=OTHER, tick=tick))
        elif status == 0xFF:
            running_status = None
            meta_type = r.u8()
            payload = r.read(r.varlen())
            if meta_type == 0x2F:
                # end of track recorded as OTHER: its tick pins trailing silence
                messages.append(MidiMessage(kind=OTHER, tick=tick))
                break
            if meta_type == 0x58 and len(payload) >= 2:
                messages.append(
                    MidiMessage(
                        kind=TIME_SIGNATURE,
                        tick=tick,
                        numerator=payload[0],
                        denominator=1 << payload[1],
                    )
                )
            else:
                messages.append(MidiMessage(kind=OTHER, tick=tick))
        else:
            raise MalformedFile(f"unexpected status byte 0x{status:02x}")
    return messages


def _channel_message(kind: int, channel: int, payload: bytes, tick: int) -> MidiMessage:
    if kind == 0x90 and payload[1] > 0:
        return MidiMessage(kind=NOTE_ON, tick=tick, channel=channel, pitch=payload[0])
    if kind == 0x80 or kind == 0x90:  # note_off, or note_on with velocity 0
        return MidiMessage(kind=NOTE_OFF, tick=tick, channel=channel, pitch=payload[0])
    if kind == 0xC0:
        return MidiMessage(kind=PROGRAM_CHANGE, tick=tick, channel=channel, program=payload[0])
    return MidiMessage(kind=OTHER, tick=tick, channel=channel)


# --- writing ---


def encode_varlen(value: int) -> bytes:
    if value < 0 or value > 0x0FFFFFFF:
        raise ValueError(f"varlen out of range: {value}")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


class TrackChunkBuilder:
    """Accumulates events at absolute ticks and serializes one MTrk chunk.

    Events are sorted by tick with meta events first, then program changes,
    then note_offs, then note_ons, so simultaneous retriggers and program
    selections land in a deterministic, playback-correct order.
    """

    _META, _PROGRAM, _OFF, _ON = 0, 1, 2, 3

    def __init__(self) -> None:
        self._events: list[tuple[int, int, int, bytes]] = []
        self._counter = 0

    def _add(self, tick: int, order: int, data: bytes) -> None:
        self._events.append((tick, order, self._counter, data))
        self._counter += 1

    def add_note_on(self, tick: int, channel: int, pitch: int, velocity: int) -> None:
        self._add(tick, self._ON, bytes([0x90 | channel, pitch, velocity]))

    def add_note_off(self, tick: int, channel: int, pitch: int) -> None:
        self._add(tick, self._OFF, bytes([0x80 | channel, pitch, 0]))

    def add_program_change(self, tick: int, channel: int, program: int) -> None:
        self._add(tick, self._PROGRAM, bytes([0xC0 | channel, program]))

    def add_time_signature(self, tick: int, numerator: int, denominator: int) -> None:
        dd = denominator.bit_length() - 1
        if 1 << dd != denominator:
            raise ValueError(f"denominator {denominator} is not a power of two")
        self._add(tick, self._META, bytes([0xFF, 0x58, 4, numerator, dd, 24, 8]))

    def add_tempo(self, tick: int, microseconds_per_beat: int) -> None:
        self._add(tick, self._META, bytes([0xFF, 0x51, 3]) + microseconds_per_beat.to_bytes(3, "big"))

    def build(self, end_tick: int | None = None) -> bytes:
        """Serialize the chunk; end_tick, when given, places the end-of-track
        marker there (never before the last event) to pin trailing silence."""
        self._events.sort(key=lambda e: e[:3])
        out = bytearray()
        tick = 0
        for event_tick, _, _, data in self._events:
            out += encode_varlen(event_tick - tick)
            out += data
            tick = event_tick
        out += encode_varlen(max(end_tick or 0, tick) - tick) + bytes([0xFF, 0x2F, 0])
        return bytes(out)


def write_smf(fmt: int, ticks_per_beat: int, chunks: Sequence[bytes]) -> bytes:
    if fmt not in (0, 1):
        raise ValueError(f"unsupported write format {fmt}")
    if fmt == 0 and len(chunks) != 1:
        raise ValueError("Type 0 files carry exactly one track chunk")
    out = bytearray(b"MThd")
    out += (6).to_bytes(4, "big")
    out += fmt.to_bytes(2, "big")
    out += len(chunks).to_bytes(2, "big")
    out += ticks_per_beat.to_bytes(2, "big")
    for chunk in chunks:
        out += b"MTrk" + len(chunk).to_bytes(4, "big") + chunk
    return bytes(out)
