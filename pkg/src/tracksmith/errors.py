"""Exception hierarchy shared across the package.

Two broad families matter for the CLI exit-code contract: ``DataError``
(malformed or unrepresentable musical input, exit code 2) and ``ModelError``
(model/checkpoint/sampling failures, exit code 3).
"""


class TracksmithError(Exception):
    """Base class for all package errors."""


class DataError(TracksmithError):
    """Invalid or unrepresentable input data."""


class ModelError(TracksmithError):
    """Model, checkpoint, or sampling failure."""


# --- MIDI / piece construction ---


class MalformedFile(DataError):
    """Byte stream is not a well-formed Standard MIDI File."""


class UnsupportedFormat(DataError):
    """Well-formed SMF we deliberately do not handle (Type 2, SMPTE division)."""


class NonQuadrupleMeter(DataError):
    """A bar handed to the quantizer does not span exactly 4 beats of 4/4."""


class EmptyPiece(DataError):
    """No tracks (or no 4/4 content) left after filtering."""


# --- token codec ---


class InvalidPiece(DataError):
    """Piece or density levels violate the representation invariants."""


class InvalidSelection(DataError):
    """Bar selection indices are out of bounds, empty, or cover everything."""


class InvalidSequence(DataError):
    """Token sequence does not parse; carries the offending position."""

    def __init__(self, position: int, reason: str):
        super().__init__(f"invalid sequence at position {position}: {reason}")
        self.position = position
        self.reason = reason


class FillCountMismatch(DataError):
    """Number of FILL_START..FILL_END groups differs from placeholder count."""


# --- dataset / model ---


class TooShort(DataError):
    """Piece has fewer bars than the requested window."""


class ContextTooLong(ModelError):
    """Context exceeds the model's attention window."""


class DivergenceError(ModelError):
    """Training loss became non-finite."""


class CheckpointError(ModelError):
    """Checkpoint file is unreadable or incompatible."""


class StepBudgetExceeded(ModelError):
    """Sampling hit max_steps before reaching its stop condition."""


class AllMasked(ModelError):
    """No token remains after masking."""
