import pytest

from tracksmith import vocab
from tracksmith.midi_core import DRUM


def test_total_size_is_451():
    # 8 structural + 128 NOTE_ON + 128 NOTE_OFF + 48 TIME_SHIFT
    # + 129 INSTRUMENT (incl. DRUM) + 10 DENSITY_LEVEL
    assert vocab.VOCAB_SIZE == 8 + 128 + 128 + 48 + 129 + 10 == 451


def test_family_counts():
    table = vocab.mnemonic_table()
    assert sum(1 for m in table if m.startswith("NOTE_ON:")) == 128
    assert sum(1 for m in table if m.startswith("NOTE_OFF:")) == 128
    assert sum(1 for m in table if m.startswith("TIME_SHIFT:")) == 48
    assert sum(1 for m in table if m.startswith("INSTRUMENT:")) == 129
    assert sum(1 for m in table if m.startswith("DENSITY_LEVEL:")) == 10


def test_id_mnemonic_bijection():
    table = vocab.mnemonic_table()
    assert len(set(table)) == vocab.VOCAB_SIZE
    for tid, name in enumerate(table):
        assert vocab.parse_mnemonic(name) == tid


def test_constructors_and_accessors():
    assert vocab.note_on_pitch(vocab.note_on(60)) == 60
    assert vocab.note_off_pitch(vocab.note_off(127)) == 127
    assert vocab.shift_amount(vocab.time_shift(48)) == 48
    assert vocab.instrument_program(vocab.instrument(DRUM)) == DRUM
    assert vocab.density_value(vocab.density_level(9)) == 9
    assert vocab.mnemonic(vocab.instrument(DRUM)) == "INSTRUMENT:DRUM"
    with pytest.raises(ValueError):
        vocab.time_shift(0)
    with pytest.raises(ValueError):
        vocab.time_shift(49)
    with pytest.raises(ValueError):
        vocab.instrument(129)


def test_vocab_hash_is_stable():
    # pinned table hash: any change to the token layout must be deliberate
    assert vocab.vocab_hash() == (
        "406db3c67ceb151d7e3c7d12113fc91dd013824057e47ae4d6ca7b02456bedc3"
    )


def test_sequence_text_round_trip():
    seq = vocab.TokenSequence(
        (vocab.PIECE_START, vocab.note_on(60), vocab.time_shift(12), vocab.note_off(60)),
        vocab.MULTITRACK,
    )
    text = seq.to_text()
    assert text.splitlines()[1] == "NOTE_ON:60"
    assert vocab.TokenSequence.from_text(text).ids == seq.ids


def test_sequence_text_kind_inference():
    seq = vocab.TokenSequence((vocab.PIECE_START, vocab.FILL_PLACEHOLDER), vocab.BARFILL)
    assert vocab.TokenSequence.from_text(seq.to_text()).kind == vocab.BARFILL


def test_sequence_json_round_trip():
    seq = vocab.TokenSequence((vocab.PIECE_START, vocab.TRACK_START), vocab.MULTITRACK)
    again = vocab.TokenSequence.from_json(seq.to_json())
    assert again == seq


def test_unknown_mnemonic_rejected():
    with pytest.raises(ValueError):
        vocab.parse_mnemonic("NOTE_ON:200")


def test_out_of_range_id_rejected():
    from tracksmith.errors import InvalidSequence

    with pytest.raises(InvalidSequence):
        vocab.TokenSequence((451,), vocab.MULTITRACK)
