// UiState -> GenerationRequest. The selection shape picks the mode: cell
// marks inpaint bars, whole-track marks regenerate those tracks, and the
// new-track forms append tracks. Mixing shapes is a visible validation
// error, not a guess.

import { currentPiece, type UiState } from "./state.js";
import { N_INSTRUMENTS, type GenerationRequest } from "./types.js";
import { validateRequest } from "./validate.js";

export type BuildResult =
  | { ok: true; request: GenerationRequest }
  | { ok: false; errors: string[] };

export function buildRequest(state: UiState): BuildResult {
  const piece = currentPiece(state);
  if (!piece) return { ok: false, errors: ["no piece loaded"] };

  const intents = [
    state.cells.size > 0,
    state.trackMarks.size > 0,
    state.newTracks.length > 0,
  ].filter(Boolean).length;
  if (intents === 0) {
    return { ok: false, errors: ["select bars or tracks, or add new tracks"] };
  }
  if (intents > 1) {
    return {
      ok: false,
      errors: ["mixed selection shapes: use bar cells, track marks, or new tracks, not a combination"],
    };
  }

  let request: GenerationRequest;
  if (state.cells.size) {
    request = buildBarRequest(state, piece.tracks.length, piece.n_bars);
  } else if (state.trackMarks.size) {
    request = buildReplaceRequest(state);
  } else {
    const built = buildAppendRequest(state);
    if ("errors" in built) return { ok: false, errors: built.errors };
    request = built;
  }

  const errors = validateRequest(request as unknown as Record<string, unknown>);
  if (state.cells.size === piece.tracks.length * piece.n_bars && state.cells.size > 0) {
    errors.push("selection covers every bar; leave at least one as context");
  }
  if (errors.length) return { ok: false, errors };
  return { ok: true, request };
}

function samplerFields(state: UiState): Partial<GenerationRequest> {
  const fields: Partial<GenerationRequest> = {};
  if (state.temperature !== 1.0) fields.temperature = state.temperature;
  if (state.topP !== 1.0) fields.top_p = state.topP;
  if (state.seed !== null) fields.seed = state.seed;
  if (state.maxSteps !== null) fields.max_steps = state.maxSteps;
  return fields;
}

function buildBarRequest(state: UiState, nTracks: number, nBars: number): GenerationRequest {
  const selection = [...state.cells]
    .map((key) => key.split(":").map(Number) as [number, number])
    .filter(([t, b]) => t < nTracks && b < nBars)
    .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  return { mode: "bar_inpaint", selection, ...samplerFields(state) };
}

function buildReplaceRequest(state: UiState): GenerationRequest {
  const replace_tracks = [...state.trackMarks].sort((a, b) => a - b);
  return { mode: "track_inpaint", replace_tracks, ...samplerFields(state) };
}

function buildAppendRequest(state: UiState): GenerationRequest | { errors: string[] } {
  const errors: string[] = [];
  state.newTracks.forEach((form, i) => {
    if (form.instruments.length === 0) errors.push(`new track ${i + 1}: empty instrument set`);
  });
  if (errors.length) return { errors };
  const request: GenerationRequest = {
    mode: "track_inpaint",
    n_new_tracks: state.newTracks.length,
    ...samplerFields(state),
  };
  if (!state.newTracks.every((f) => f.instruments.length === N_INSTRUMENTS)) {
    request.allowed_instruments = state.newTracks.map((f) => [...f.instruments].sort((a, b) => a - b));
  }
  if (state.newTracks.some((f) => f.density !== null)) {
    request.densities = state.newTracks.map((f) => f.density);
  }
  return request;
}
