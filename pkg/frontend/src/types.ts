// Wire types mirroring the service contract (see GET /schemas on the server).

export interface NoteCell {
  pitch: number;
  onset: number;
  offset: number;
}

export interface TrackRoll {
  instrument: number; // 0-127 General MIDI program, 128 = drums
  density: number; // 0-9
  bars: NoteCell[][];
}

export interface Pianoroll {
  id: string;
  n_bars: number;
  tracks: TrackRoll[];
}

export type Mode = "track_inpaint" | "bar_inpaint";

export interface GenerationRequest {
  mode: Mode;
  n_new_tracks?: number;
  replace_tracks?: number[];
  allowed_instruments?: number[][];
  densities?: (number | null)[];
  selection?: [number, number][];
  temperature?: number;
  top_p?: number;
  seed?: number;
  max_steps?: number;
}

export interface GenerateResponse {
  id: string;
  seed: number;
  pianoroll: Pianoroll;
}

export interface HealthResponse {
  status: "ok" | "degraded";
  model: string | null;
  vocab_hash: string;
}

export const DRUM = 128;
export const N_INSTRUMENTS = 129;
export const N_DENSITY_LEVELS = 10;
export const BAR_SUBDIVISIONS = 48;
export const MAX_NEW_TRACKS = 16;
