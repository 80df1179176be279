// Immutable UI state with reducer-style transitions so every rule is
// unit-testable without a DOM. The history stack holds full pianorolls:
// back-navigation never needs the network.

import type { Pianoroll } from "./types.js";

export interface TrackForm {
  instruments: number[]; // allowed set for this new track; empty = invalid
  density: number | null; // null = model's choice
}

export interface UiState {
  history: Pianoroll[]; // history[history.length - 1] is the current piece
  cells: ReadonlySet<string>; // "track:bar" marks for bar inpainting
  trackMarks: ReadonlySet<number>; // whole-track marks for regeneration
  newTracks: TrackForm[]; // append-track constraint forms
  temperature: number;
  topP: number;
  seed: number | null;
  maxSteps: number | null;
}

export function initialState(): UiState {
  return {
    history: [],
    cells: new Set(),
    trackMarks: new Set(),
    newTracks: [],
    temperature: 1.0,
    topP: 1.0,
    seed: null,
    maxSteps: null,
  };
}

export function currentPiece(state: UiState): Pianoroll | null {
  return state.history.length ? state.history[state.history.length - 1] : null;
}

export function cellKey(track: number, bar: number): string {
  return `${track}:${bar}`;
}

export function loadPiece(state: UiState, roll: Pianoroll): UiState {
  return { ...state, history: [roll], cells: new Set(), trackMarks: new Set() };
}

export function applyResult(state: UiState, roll: Pianoroll): UiState {
  return {
    ...state,
    history: [...state.history, roll],
    cells: new Set(),
    trackMarks: new Set(),
  };
}

export function goBack(state: UiState): UiState {
  if (state.history.length <= 1) return state;
  return {
    ...state,
    history: state.history.slice(0, -1),
    cells: new Set(),
    trackMarks: new Set(),
  };
}

export function toggleCell(state: UiState, track: number, bar: number): UiState {
  const piece = currentPiece(state);
  if (!piece || track < 0 || track >= piece.tracks.length || bar < 0 || bar >= piece.n_bars) {
    return state;
  }
  const cells = new Set(state.cells);
  const key = cellKey(track, bar);
  if (cells.has(key)) cells.delete(key);
  else cells.add(key);
  return { ...state, cells };
}

export function toggleTrackMark(state: UiState, track: number): UiState {
  const piece = currentPiece(state);
  if (!piece || track < 0 || track >= piece.tracks.length) return state;
  const trackMarks = new Set(state.trackMarks);
  if (trackMarks.has(track)) trackMarks.delete(track);
  else trackMarks.add(track);
  return { ...state, trackMarks };
}

export function clearSelection(state: UiState): UiState {
  return { ...state, cells: new Set(), trackMarks: new Set() };
}

export function setNewTrackCount(state: UiState, count: number): UiState {
  const bounded = Math.max(0, Math.min(16, Math.floor(count)));
  const newTracks = state.newTracks.slice(0, bounded);
  while (newTracks.length < bounded) {
    newTracks.push({ instruments: allInstruments(), density: null });
  }
  return { ...state, newTracks };
}

export function updateTrackForm(state: UiState, index: number, form: TrackForm): UiState {
  if (index < 0 || index >= state.newTracks.length) return state;
  const newTracks = state.newTracks.slice();
  newTracks[index] = { instruments: [...form.instruments], density: form.density };
  return { ...state, newTracks };
}

export function setSampler(
  state: UiState,
  fields: Partial<Pick<UiState, "temperature" | "topP" | "seed" | "maxSteps">>,
): UiState {
  return { ...state, ...fields };
}

export function downloadUrl(state: UiState, base = ""): string | null {
  const piece = currentPiece(state);
  return piece ? `${base}/pieces/${piece.id}/midi` : null;
}

export function allInstruments(): number[] {
  return Array.from({ length: 129 }, (_, i) => i);
}
