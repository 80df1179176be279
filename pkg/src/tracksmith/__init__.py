"""Multi-track MIDI tokenization, density-conditioned modelling, and
constrained generation."""

from .midi_core import (
    BAR_SUBDIVISIONS,
    DRUM,
    Bar,
    NoteEvent,
    Piece,
    QuantizedTrack,
    assemble_piece,
    piece_from_midi,
    piece_to_midi,
)
from .vocab import VOCAB_SIZE, TokenSequence, vocab_hash
from .codec import decode, encode_barfill, encode_multitrack, reinsert_fills, validate

__version__ = "0.1.0"

__all__ = [
    "BAR_SUBDIVISIONS",
    "DRUM",
    "Bar",
    "NoteEvent",
    "Piece",
    "QuantizedTrack",
    "TokenSequence",
    "VOCAB_SIZE",
    "assemble_piece",
    "decode",
    "encode_barfill",
    "encode_multitrack",
    "piece_from_midi",
    "piece_to_midi",
    "reinsert_fills",
    "validate",
    "vocab_hash",
    "__version__",
]
