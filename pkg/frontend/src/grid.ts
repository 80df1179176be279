// Pure geometry: pianoroll JSON -> GridModel. The DOM layer only places
// rectangles, so snapshots of this model pin the whole rendering.

import { instrumentName } from "./names.js";
import { BAR_SUBDIVISIONS, type Pianoroll } from "./types.js";
import { cellKey } from "./state.js";

export const SUBDIVISION_WIDTH = 3;
export const PITCH_HEIGHT = 4;
export const BAND_GAP = 14;
export const LABEL_WIDTH = 190;
export const HEADER_HEIGHT = 22;
const PITCH_PAD = 2;
const MIN_PITCH_SPAN = 12;

export interface NoteRect {
  track: number;
  bar: number;
  pitch: number;
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface CellRect {
  track: number;
  bar: number;
  x: number;
  y: number;
  width: number;
  height: number;
  selected: boolean;
}

export interface TrackBand {
  index: number;
  y: number;
  height: number;
  instrument: number;
  name: string;
  density: number;
  marked: boolean;
  pitchLo: number;
  pitchHi: number;
}

export interface GridModel {
  width: number;
  height: number;
  nBars: number;
  barWidth: number;
  bands: TrackBand[];
  cells: CellRect[];
  notes: NoteRect[];
  barLineXs: number[];
}

export function buildGridModel(
  roll: Pianoroll,
  cells: ReadonlySet<string> = new Set(),
  trackMarks: ReadonlySet<number> = new Set(),
): GridModel {
  const barWidth = BAR_SUBDIVISIONS * SUBDIVISION_WIDTH;
  const width = LABEL_WIDTH + roll.n_bars * barWidth;
  const bands: TrackBand[] = [];
  const noteRects: NoteRect[] = [];
  const cellRects: CellRect[] = [];
  let y = HEADER_HEIGHT;
  roll.tracks.forEach((track, t) => {
    const pitches = track.bars.flat().map((n) => n.pitch);
    let lo = pitches.length ? Math.min(...pitches) - PITCH_PAD : 54;
    let hi = pitches.length ? Math.max(...pitches) + PITCH_PAD : 66;
    if (hi - lo < MIN_PITCH_SPAN) {
      const extra = MIN_PITCH_SPAN - (hi - lo);
      lo -= Math.floor(extra / 2);
      hi += Math.ceil(extra / 2);
    }
    lo = Math.max(0, lo);
    hi = Math.min(127, hi);
    const height = (hi - lo + 1) * PITCH_HEIGHT;
    bands.push({
      index: t,
      y,
      height,
      instrument: track.instrument,
      name: instrumentName(track.instrument),
      density: track.density,
      marked: trackMarks.has(t),
      pitchLo: lo,
      pitchHi: hi,
    });
    track.bars.forEach((bar, b) => {
      cellRects.push({
        track: t,
        bar: b,
        x: LABEL_WIDTH + b * barWidth,
        y,
        width: barWidth,
        height,
        selected: cells.has(cellKey(t, b)),
      });
      for (const note of bar) {
        noteRects.push({
          track: t,
          bar: b,
          pitch: note.pitch,
          x: LABEL_WIDTH + b * barWidth + note.onset * SUBDIVISION_WIDTH,
          y: y + (hi - note.pitch) * PITCH_HEIGHT,
          width: (note.offset - note.onset) * SUBDIVISION_WIDTH,
          height: PITCH_HEIGHT,
        });
      }
    });
    y += height + BAND_GAP;
  });
  const barLineXs = Array.from({ length: roll.n_bars + 1 }, (_, b) => LABEL_WIDTH + b * barWidth);
  return {
    width,
    height: y,
    nBars: roll.n_bars,
    barWidth,
    bands,
    cells: cellRects,
    notes: noteRects,
    barLineXs,
  };
}
