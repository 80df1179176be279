"""Binary SMF reader/writer.

The fixed expectations below were derived by hand-decoding the inline byte
strings against the SMF chunk layout (header MThd: format, ntrks, division;
track MTrk: delta-time varlen + event), so each test documents its own
oracle.
"""

import random

import pytest

from tracksmith import smf
from tracksmith.errors import MalformedFile, UnsupportedFormat


def header(fmt: int, ntrks: int, division: int) -> bytes:
    return b"MThd" + (6).to_bytes(4, "big") + fmt.to_bytes(2, "big") + ntrks.to_bytes(2, "big") + division.to_bytes(2, "big")


def track(body: bytes) -> bytes:
    return b"MTrk" + len(body).to_bytes(4, "big") + body


# one note: on(ch0, pitch 60, vel 64)@0, off@480; delta 480 = varlen 83 60
MINIMAL_TYPE0 = header(0, 1, 480) + track(
    bytes([0x00, 0x90, 0x3C, 0x40])
    + bytes([0x83, 0x60, 0x80, 0x3C, 0x00])
    + bytes([0x00, 0xFF, 0x2F, 0x00])
)


def test_minimal_type0():
    ir = smf.parse_midi(MINIMAL_TYPE0)
    assert ir.format == 0
    assert ir.ticks_per_beat == 480
    assert len(ir.track_chunks) == 1
    notes = [m for m in ir.track_chunks[0] if m.kind in (smf.NOTE_ON, smf.NOTE_OFF)]
    assert notes == [
        smf.MidiMessage(kind=smf.NOTE_ON, tick=0, channel=0, pitch=60),
        smf.MidiMessage(kind=smf.NOTE_OFF, tick=480, channel=0, pitch=60),
    ]


def test_type2_rejected():
    with pytest.raises(UnsupportedFormat):
        smf.parse_midi(header(2, 1, 480))


def test_smpte_division_rejected():
    with pytest.raises(UnsupportedFormat):
        smf.parse_midi(header(0, 1, 0xE250) + track(b"\x00\xff\x2f\x00"))


def test_note_on_velocity_zero_normalized_to_note_off():
    body = bytes([0x00, 0x90, 0x3C, 0x40]) + bytes([0x60, 0x90, 0x3C, 0x00]) + bytes([0x00, 0xFF, 0x2F, 0x00])
    ir = smf.parse_midi(header(0, 1, 480) + track(body))
    kinds = [m.kind for m in ir.track_chunks[0] if m.kind != smf.OTHER]
    assert kinds == [smf.NOTE_ON, smf.NOTE_OFF]
    assert ir.track_chunks[0][1].tick == 96


def test_running_status():
    # status byte 0x90 applies to the two following data-only events
    body = bytes([0x00, 0x90, 0x3C, 0x40, 0x00, 0x3E, 0x40, 0x60, 0x3C, 0x00]) + bytes(
        [0x00, 0xFF, 0x2F, 0x00]
    )
    ir = smf.parse_midi(header(0, 1, 96) + track(body))
    notes = [m for m in ir.track_chunks[0] if m.kind != smf.OTHER]
    assert [(m.kind, m.pitch, m.tick) for m in notes] == [
        (smf.NOTE_ON, 60, 0),
        (smf.NOTE_ON, 62, 0),
        (smf.NOTE_OFF, 60, 96),
    ]


def test_time_signature_meta():
    body = bytes([0x00, 0xFF, 0x58, 0x04, 0x03, 0x02, 0x18, 0x08]) + bytes([0x00, 0xFF, 0x2F, 0x00])
    ir = smf.parse_midi(header(0, 1, 480) + track(body))
    ts = ir.track_chunks[0][0]
    assert ts.kind == smf.TIME_SIGNATURE
    assert (ts.numerator, ts.denominator) == (3, 4)


def test_format0_with_two_tracks_rejected():
    with pytest.raises(MalformedFile):
        smf.parse_midi(header(0, 2, 480) + track(b"\x00\xff\x2f\x00") + track(b"\x00\xff\x2f\x00"))


def test_missing_tracks_rejected():
    with pytest.raises(MalformedFile):
        smf.parse_midi(header(1, 2, 480) + track(b"\x00\xff\x2f\x00"))


def test_truncated_file():
    with pytest.raises(MalformedFile):
        smf.parse_midi(MINIMAL_TYPE0[:-3])


def test_garbage_rejected():
    with pytest.raises(MalformedFile):
        smf.parse_midi(b"RIFFxxxx")


def test_data_byte_with_high_bit_rejected():
    body = bytes([0x00, 0x90, 0xFC, 0x40])
    with pytest.raises(MalformedFile):
        smf.parse_midi(header(0, 1, 480) + track(body))


def test_alien_chunks_skipped():
    alien = b"XFIH" + (4).to_bytes(4, "big") + b"\xde\xad\xbe\xef"
    data = header(1, 1, 480) + alien + track(b"\x00\xff\x2f\x00")
    ir = smf.parse_midi(data)
    assert len(ir.track_chunks) == 1


def test_varlen_round_trip():
    for value in [0, 1, 127, 128, 480, 16383, 16384, 0x0FFFFFFF]:
        encoded = smf.encode_varlen(value)
        r = smf._Reader(encoded)
        assert r.varlen() == value
        assert r.exhausted


def test_varlen_out_of_range():
    with pytest.raises(ValueError):
        smf.encode_varlen(0x10000000)


def test_builder_write_parse_round_trip():
    rng = random.Random(9)
    for _ in range(40):
        events = []
        builder = smf.TrackChunkBuilder()
        tick = 0
        for _ in range(rng.randint(1, 30)):
            tick += rng.randint(0, 2000)
            pitch = rng.randrange(128)
            channel = rng.randrange(16)
            builder.add_note_on(tick, channel, pitch, 96)
            builder.add_note_off(tick + rng.randint(1, 500), channel, pitch)
            events.append((tick, channel, pitch))
        data = smf.write_smf(1, 480, [builder.build()])
        ir = smf.parse_midi(data)
        ons = [(m.tick, m.channel, m.pitch) for m in ir.track_chunks[0] if m.kind == smf.NOTE_ON]
        assert sorted(ons) == sorted(events)
        for chunk in ir.track_chunks:
            ticks = [m.tick for m in chunk]
            assert ticks == sorted(ticks)


def test_builder_program_before_note_at_same_tick():
    builder = smf.TrackChunkBuilder()
    builder.add_note_on(0, 3, 60, 96)
    builder.add_program_change(0, 3, 34)
    builder.add_note_off(480, 3, 60)
    ir = smf.parse_midi(smf.write_smf(0, 480, [builder.build()]))
    kinds = [m.kind for m in ir.track_chunks[0] if m.kind != smf.OTHER]
    assert kinds == [smf.PROGRAM_CHANGE, smf.NOTE_ON, smf.NOTE_OFF]


def test_ir_to_json_shape():
    ir = smf.parse_midi(MINIMAL_TYPE0)
    payload = smf.ir_to_json(ir)
    assert payload["format"] == 0
    assert payload["ticks_per_beat"] == 480
    assert payload["track_chunks"][0][0]["kind"] == "note_on"
