// Hand-rolled mirror of the service's published JSON schemas. The e2e suite
// confirms agreement with the live server; keeping the checks local gives
// the form instant feedback with zero runtime dependencies.

import {
  BAR_SUBDIVISIONS,
  MAX_NEW_TRACKS,
  N_DENSITY_LEVELS,
  N_INSTRUMENTS,
} from "./types.js";

const REQUEST_KEYS = new Set([
  "mode",
  "n_new_tracks",
  "replace_tracks",
  "allowed_instruments",
  "densities",
  "selection",
  "temperature",
  "top_p",
  "seed",
  "max_steps",
]);

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function isInt(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value);
}

export function validateRequest(payload: unknown): string[] {
  const errors: string[] = [];
  if (!isRecord(payload)) return ["request must be an object"];
  for (const key of Object.keys(payload)) {
    if (!REQUEST_KEYS.has(key)) errors.push(`unknown field ${key}`);
  }
  const mode = payload.mode;
  if (mode !== "track_inpaint" && mode !== "bar_inpaint") {
    errors.push("mode must be track_inpaint or bar_inpaint");
    return errors;
  }
  if (payload.n_new_tracks !== undefined) {
    if (!isInt(payload.n_new_tracks) || payload.n_new_tracks < 1 || payload.n_new_tracks > MAX_NEW_TRACKS) {
      errors.push(`n_new_tracks must be an integer in 1..${MAX_NEW_TRACKS}`);
    }
  }
  if (payload.replace_tracks !== undefined) {
    const rt = payload.replace_tracks;
    if (!Array.isArray(rt) || rt.length === 0 || !rt.every((i) => isInt(i) && i >= 0)) {
      errors.push("replace_tracks must be a nonempty array of nonnegative integers");
    } else if (new Set(rt).size !== rt.length) {
      errors.push("replace_tracks entries must be unique");
    }
  }
  if (mode === "track_inpaint" && payload.n_new_tracks === undefined && payload.replace_tracks === undefined) {
    errors.push("track_inpaint needs n_new_tracks or replace_tracks");
  }
  if (payload.n_new_tracks !== undefined && payload.replace_tracks !== undefined) {
    errors.push("n_new_tracks and replace_tracks are mutually exclusive");
  }
  if (mode === "bar_inpaint") {
    const sel = payload.selection;
    if (!Array.isArray(sel)) {
      errors.push("bar_inpaint needs a selection");
    } else if (
      !sel.every(
        (pair) =>
          Array.isArray(pair) && pair.length === 2 && pair.every((v) => isInt(v) && v >= 0),
      )
    ) {
      errors.push("selection entries must be [track, bar] index pairs");
    }
  }
  if (payload.allowed_instruments !== undefined) {
    const ai = payload.allowed_instruments;
    if (
      !Array.isArray(ai) ||
      !ai.every(
        (set) =>
          Array.isArray(set) &&
          set.length >= 1 &&
          set.every((p) => isInt(p) && p >= 0 && p < N_INSTRUMENTS),
      )
    ) {
      errors.push("allowed_instruments must be arrays of instrument ids 0..128, each nonempty");
    }
  }
  if (payload.densities !== undefined) {
    const d = payload.densities;
    if (
      !Array.isArray(d) ||
      !d.every((v) => v === null || (isInt(v) && v >= 0 && v < N_DENSITY_LEVELS))
    ) {
      errors.push("densities must be integers 0..9 or null");
    }
  }
  if (payload.temperature !== undefined && !(typeof payload.temperature === "number" && payload.temperature > 0)) {
    errors.push("temperature must be positive");
  }
  if (
    payload.top_p !== undefined &&
    !(typeof payload.top_p === "number" && payload.top_p > 0 && payload.top_p <= 1)
  ) {
    errors.push("top_p must be in (0, 1]");
  }
  if (payload.seed !== undefined && !(isInt(payload.seed) && payload.seed >= 0)) {
    errors.push("seed must be a nonnegative integer");
  }
  if (payload.max_steps !== undefined && !(isInt(payload.max_steps) && payload.max_steps >= 1)) {
    errors.push("max_steps must be a positive integer");
  }
  return errors;
}

export function validatePianoroll(payload: unknown): string[] {
  const errors: string[] = [];
  if (!isRecord(payload)) return ["pianoroll must be an object"];
  if (typeof payload.id !== "string") errors.push("id must be a string");
  if (!isInt(payload.n_bars) || (payload.n_bars as number) < 1) errors.push("n_bars must be a positive integer");
  const tracks = payload.tracks;
  if (!Array.isArray(tracks) || tracks.length === 0) {
    errors.push("tracks must be a nonempty array");
    return errors;
  }
  tracks.forEach((track, t) => {
    if (!isRecord(track)) {
      errors.push(`track ${t} must be an object`);
      return;
    }
    if (!isInt(track.instrument) || (track.instrument as number) < 0 || (track.instrument as number) >= N_INSTRUMENTS) {
      errors.push(`track ${t}: instrument out of range`);
    }
    if (!isInt(track.density) || (track.density as number) < 0 || (track.density as number) >= N_DENSITY_LEVELS) {
      errors.push(`track ${t}: density out of range`);
    }
    const bars = track.bars;
    if (!Array.isArray(bars) || bars.length !== payload.n_bars) {
      errors.push(`track ${t}: bars must have length n_bars`);
      return;
    }
    bars.forEach((bar, b) => {
      if (!Array.isArray(bar)) {
        errors.push(`track ${t} bar ${b}: must be an array`);
        return;
      }
      for (const note of bar) {
        if (
          !isRecord(note) ||
          !isInt(note.pitch) || (note.pitch as number) < 0 || (note.pitch as number) > 127 ||
          !isInt(note.onset) || (note.onset as number) < 0 ||
          !isInt(note.offset) ||
          (note.onset as number) >= (note.offset as number) ||
          (note.offset as number) > BAR_SUBDIVISIONS
        ) {
          errors.push(`track ${t} bar ${b}: bad note`);
          break;
        }
      }
    });
  });
  return errors;
}
