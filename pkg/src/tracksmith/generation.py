"""Constrained autoregressive generation over any sequence predictor.

Every step intersects the predictor's scores with a grammar mask, so the
output always decodes, whatever the model quality. Track generation stops
at the n-th new TRACK_END, bar inpainting at the n-th FILL_END. Instrument
masks are hard constraints: a disallowed INSTRUMENT token has probability
exactly zero. Density control forces the DENSITY_LEVEL token; the realized
note density remains model behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import vocab
from .codec import (
    decode,
    encode_barfill,
    encode_multitrack,
    normalize_selection,
    reinsert_fills,
    strip_fills,
)
from .errors import AllMasked, InvalidPiece, InvalidSelection, StepBudgetExceeded
from .midi_core import BAR_SUBDIVISIONS, DRUM, Piece
from .model import SequencePredictor

TRACK_INPAINT = "track_inpaint"
BAR_INPAINT = "bar_inpaint"

ALL_INSTRUMENTS = frozenset(range(DRUM + 1))

DEFAULT_WINDOW = 1024  # step-budget basis for predictors without a window


@dataclass(frozen=True)
class SamplerParams:
    temperature: float = 1.0
    top_p: float = 1.0
    max_steps: int | None = None  # None: 2x the predictor's window
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class TrackSpec:
    """Constraints for one track to be generated."""

    allowed_instruments: frozenset[int] = ALL_INSTRUMENTS
    density: int | None = None

    def __post_init__(self) -> None:
        if not self.allowed_instruments:
            raise ValueError("allowed instrument set is empty")
        if not self.allowed_instruments <= ALL_INSTRUMENTS:
            raise ValueError("instrument ids must be 0..128")
        if self.density is not None and not 0 <= self.density < vocab.N_DENSITY_LEVELS:
            raise ValueError(f"density level {self.density} out of range")


@dataclass(frozen=True)
class GenerationRequest:
    mode: str
    piece: Piece | None = None
    track_specs: tuple[TrackSpec, ...] = ()
    selection: tuple[tuple[int, int], ...] = ()
    base_densities: tuple[int, ...] | None = None
    params: SamplerParams = field(default_factory=SamplerParams)

    def __post_init__(self) -> None:
        if self.mode not in (TRACK_INPAINT, BAR_INPAINT):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == TRACK_INPAINT and not self.track_specs:
            raise ValueError("track_inpaint needs at least one TrackSpec")

    @property
    def n_new_tracks(self) -> int:
        return len(self.track_specs)


def sample_token(
    scores: np.ndarray,
    params: SamplerParams,
    mask: np.ndarray,
    rng: np.random.Generator,
) -> int:
    """Temperature -> softmax -> nucleus truncation -> draw, with masked ids
    at probability exactly zero."""
    allowed = np.flatnonzero(mask)
    if allowed.size == 0:
        raise AllMasked("no token permitted at this position")
    logits = np.asarray(scores, dtype=np.float64)[allowed] / params.temperature
    logits -= logits.max()
    probs = np.exp(logits)
    probs /= probs.sum()
    # ties broken randomly: an index-ordered nucleus over tied scores would
    # systematically exclude high token ids and can stall the grammar walk
    shuffle = rng.permutation(allowed.size)
    order = shuffle[np.argsort(-probs[shuffle], kind="stable")]
    cumulative = np.cumsum(probs[order])
    keep = min(int(np.searchsorted(cumulative, params.top_p, side="left")) + 1, allowed.size)
    kept = order[:keep]
    kept_probs = probs[kept] / probs[kept].sum()
    return int(allowed[rng.choice(kept, p=kept_probs)])


class GrammarState:
    """Structural automaton for the generated region.

    Tracks mode: emit full tracks (header, n_bars bars, TRACK_END) after a
    MultiTrack context. When the base piece is empty the first generated
    track's bar count becomes the target for the rest. Fills mode: emit
    FILL_START..FILL_END groups after a BarFill context. Inside a bar or
    fill the mask keeps cumulative time <= 48, forbids re-opening an open
    pitch or closing at zero length, and gates the closing token on time
    exactly 48 with every note closed.
    """

    _TRACK_START, _INSTRUMENT, _DENSITY, _BETWEEN_BARS, _IN_BAR = range(5)
    _FILL_START, _IN_FILL = 5, 6
    _DONE = 7

    def __init__(self, phase: int, n_targets: int, specs: tuple[TrackSpec, ...], n_bars: int | None):
        self.phase = phase
        self.n_targets = n_targets
        self.specs = specs
        self.n_bars = n_bars
        self.completed = 0
        self.bars_done = 0
        self.time = 0
        self.open_notes: dict[int, int] = {}

    @classmethod
    def for_tracks(cls, specs: Sequence[TrackSpec], n_bars: int | None) -> "GrammarState":
        return cls(cls._TRACK_START, len(specs), tuple(specs), n_bars)

    @classmethod
    def for_fills(cls, n_fills: int) -> "GrammarState":
        return cls(cls._FILL_START, n_fills, (), None)

    @property
    def done(self) -> bool:
        return self.phase == self._DONE

    def allowed(self) -> np.ndarray:
        mask = np.zeros(vocab.VOCAB_SIZE, dtype=bool)
        phase = self.phase
        if phase == self._TRACK_START:
            mask[vocab.TRACK_START] = True
        elif phase == self._INSTRUMENT:
            for program in self.specs[self.completed].allowed_instruments:
                mask[vocab.instrument(program)] = True
        elif phase == self._DENSITY:
            forced = self.specs[self.completed].density
            if forced is None:
                mask[vocab.DENSITY_BASE : vocab.DENSITY_BASE + vocab.N_DENSITY_LEVELS] = True
            else:
                mask[vocab.density_level(forced)] = True
        elif phase == self._BETWEEN_BARS:
            if self.n_bars is None:
                mask[vocab.BAR_START] = True
                if self.bars_done > 0:
                    mask[vocab.TRACK_END] = True
            elif self.bars_done < self.n_bars:
                mask[vocab.BAR_START] = True
            else:
                mask[vocab.TRACK_END] = True
        elif phase == self._FILL_START:
            mask[vocab.FILL_START] = True
        elif phase in (self._IN_BAR, self._IN_FILL):
            self._bar_mask(mask, vocab.BAR_END if phase == self._IN_BAR else vocab.FILL_END)
        return mask

    def _bar_mask(self, mask: np.ndarray, end_token: int) -> None:
        remaining = BAR_SUBDIVISIONS - self.time
        if remaining > 0:
            mask[vocab.TIME_SHIFT_BASE : vocab.TIME_SHIFT_BASE + remaining] = True
            mask[vocab.NOTE_ON_BASE : vocab.NOTE_ON_BASE + 128] = True
            for pitch in self.open_notes:
                mask[vocab.note_on(pitch)] = False
        for pitch, onset in self.open_notes.items():
            if onset < self.time:
                mask[vocab.note_off(pitch)] = True
        if remaining == 0 and not self.open_notes:
            mask[end_token] = True

    def feed(self, tid: int) -> None:
        phase = self.phase
        if phase == self._TRACK_START:
            self.phase = self._INSTRUMENT
        elif phase == self._INSTRUMENT:
            self.phase = self._DENSITY
        elif phase == self._DENSITY:
            self.phase = self._BETWEEN_BARS
            self.bars_done = 0
        elif phase == self._BETWEEN_BARS:
            if tid == vocab.BAR_START:
                self.phase = self._IN_BAR
                self.time = 0
                self.open_notes = {}
            else:  # TRACK_END
                if self.n_bars is None:
                    self.n_bars = self.bars_done
                self._complete(self._TRACK_START)
        elif phase == self._FILL_START:
            self.phase = self._IN_FILL
            self.time = 0
            self.open_notes = {}
        elif phase in (self._IN_BAR, self._IN_FILL):
            if vocab.is_time_shift(tid):
                self.time += vocab.shift_amount(tid)
            elif vocab.is_note_on(tid):
                self.open_notes[vocab.note_on_pitch(tid)] = self.time
            elif vocab.is_note_off(tid):
                self.open_notes.pop(vocab.note_off_pitch(tid), None)
            elif tid == vocab.BAR_END:
                self.bars_done += 1
                self.phase = self._BETWEEN_BARS
            else:  # FILL_END
                self._complete(self._FILL_START)
        else:
            raise RuntimeError("feed() called on a finished GrammarState")

    def _complete(self, next_phase: int) -> None:
        self.completed += 1
        self.phase = self._DONE if self.completed == self.n_targets else next_phase


def run_constrained(
    predictor: SequencePredictor,
    context: Sequence[int],
    state: GrammarState,
    params: SamplerParams,
) -> list[int]:
    """Sample under the grammar mask until the state is done; returns
    context + generated ids. Raises StepBudgetExceeded past max_steps."""
    rng = np.random.default_rng(params.seed)
    window = predictor.window
    max_steps = params.max_steps if params.max_steps is not None else 2 * (window or DEFAULT_WINDOW)
    ids = list(context)
    steps = 0
    while not state.done:
        if steps >= max_steps:
            raise StepBudgetExceeded(f"stop condition not reached within {max_steps} steps")
        scores = predictor.predict(ids[-window:] if window else ids)
        tid = sample_token(scores, params, state.allowed(), rng)
        ids.append(tid)
        state.feed(tid)
        steps += 1
    return ids


def generate_tracks(
    predictor: SequencePredictor, request: GenerationRequest
) -> tuple[Piece, tuple[int, ...]]:
    """Append n new tracks conditioned on the base piece (empty base means
    generation from scratch). Returns the full decoded piece and its
    per-track density levels; base content decodes bit-identically."""
    if request.mode != TRACK_INPAINT:
        raise ValueError(f"generate_tracks called with mode {request.mode!r}")
    base = request.piece
    if base is not None and base.tracks:
        base_densities = request.base_densities or (0,) * base.n_tracks
        context = encode_multitrack(base, base_densities).ids
        n_bars = base.n_bars
    else:
        context = (vocab.PIECE_START,)
        n_bars = None
    state = GrammarState.for_tracks(request.track_specs, n_bars)
    ids = run_constrained(predictor, context, state, request.params)
    return decode(vocab.TokenSequence(tuple(ids), vocab.MULTITRACK))


def inpaint_bars(
    predictor: SequencePredictor, request: GenerationRequest
) -> tuple[Piece, tuple[int, ...]]:
    """Regenerate the selected bars in place; everything else is preserved
    bit-for-bit because the context is fixed and only fill bodies are
    sampled."""
    if request.mode != BAR_INPAINT:
        raise ValueError(f"inpaint_bars called with mode {request.mode!r}")
    if request.piece is None or not request.piece.tracks:
        raise InvalidPiece("bar inpainting needs a non-empty piece")
    piece = request.piece
    selected = normalize_selection(piece, request.selection)
    if not selected:
        raise InvalidSelection("selection is empty")
    if len(selected) >= piece.n_tracks * piece.n_bars:
        raise InvalidSelection("selection covers every bar; no context would remain")
    base_densities = request.base_densities or (0,) * piece.n_tracks
    context = strip_fills(encode_barfill(piece, selected, base_densities)).ids
    state = GrammarState.for_fills(len(selected))
    ids = run_constrained(predictor, context, state, request.params)
    seq = vocab.TokenSequence(tuple(ids), vocab.BARFILL)
    return decode(reinsert_fills(seq))


def resample_iteratively(
    predictor: SequencePredictor,
    piece: Piece,
    densities: Sequence[int],
    rounds: int,
    params: SamplerParams,
) -> tuple[Piece, tuple[int, ...]]:
    """Regenerate each track in turn conditioned on all the others, keeping
    its instrument and density level; `rounds` full passes in index order.
    rounds * n_tracks single-track generations in total."""
    if piece.n_tracks < 2:
        raise InvalidPiece("iterative resampling needs at least 2 tracks")
    if len(densities) != piece.n_tracks:
        raise InvalidPiece(f"{len(densities)} densities for {piece.n_tracks} tracks")
    master = np.random.default_rng(params.seed)
    current = piece
    levels = list(densities)
    for _ in range(rounds):
        for index in range(current.n_tracks):
            rest_tracks = tuple(t for i, t in enumerate(current.tracks) if i != index)
            rest_levels = tuple(l for i, l in enumerate(levels) if i != index)
            spec = TrackSpec(
                allowed_instruments=frozenset({current.tracks[index].instrument}),
                density=levels[index],
            )
            request = GenerationRequest(
                mode=TRACK_INPAINT,
                piece=Piece(rest_tracks),
                track_specs=(spec,),
                base_densities=rest_levels,
                params=replace(params, seed=int(master.integers(2**63))),
            )
            out_piece, out_levels = generate_tracks(predictor, request)
            tracks = list(current.tracks)
            tracks[index] = out_piece.tracks[-1]
            levels[index] = out_levels[-1]
            current = Piece(tuple(tracks))
    return current, tuple(levels)
