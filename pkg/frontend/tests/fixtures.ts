// Shared fixtures and a tiny deterministic PRNG for property-style tests.

import {
  allInstruments,
  initialState,
  loadPiece,
  setSampler,
  type TrackForm,
  type UiState,
} from "../src/state.js";
import type { NoteCell, Pianoroll, TrackRoll } from "../src/types.js";

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randInt(rand: () => number, lo: number, hi: number): number {
  return lo + Math.floor(rand() * (hi - lo + 1));
}

export function fixtureRoll(): Pianoroll {
  const bar0: NoteCell[] = [
    { pitch: 60, onset: 0, offset: 12 },
    { pitch: 64, onset: 12, offset: 24 },
    { pitch: 67, onset: 24, offset: 48 },
  ];
  const bar1: NoteCell[] = [{ pitch: 55, onset: 0, offset: 48 }];
  const drums: NoteCell[] = [
    { pitch: 36, onset: 0, offset: 1 },
    { pitch: 42, onset: 12, offset: 13 },
    { pitch: 36, onset: 24, offset: 25 },
    { pitch: 42, onset: 36, offset: 37 },
  ];
  const tracks: TrackRoll[] = [
    { instrument: 0, density: 3, bars: [bar0, bar1] },
    { instrument: 128, density: 6, bars: [drums, []] },
  ];
  return { id: "fixture0000000000", n_bars: 2, tracks };
}

export function randomRoll(rand: () => number): Pianoroll {
  const nTracks = randInt(rand, 1, 4);
  const nBars = randInt(rand, 1, 4);
  const tracks: TrackRoll[] = [];
  for (let t = 0; t < nTracks; t++) {
    const bars: NoteCell[][] = [];
    for (let b = 0; b < nBars; b++) {
      const notes: NoteCell[] = [];
      const count = randInt(rand, 0, 4);
      for (let i = 0; i < count; i++) {
        const onset = randInt(rand, 0, 46);
        notes.push({
          pitch: randInt(rand, 30, 90),
          onset,
          offset: randInt(rand, onset + 1, 48),
        });
      }
      bars.push(notes);
    }
    tracks.push({ instrument: randInt(rand, 0, 128), density: randInt(rand, 0, 9), bars });
  }
  return { id: `piece${Math.floor(rand() * 1e9)}`, n_bars: nBars, tracks };
}

export type Intent = "cells" | "marks" | "append";

export function randomUiState(rand: () => number): { state: UiState; intent: Intent } {
  const roll = randomRoll(rand);
  let state = loadPiece(initialState(), roll);
  const intents: Intent[] = ["cells", "marks", "append"];
  const intent = intents[randInt(rand, 0, 2)];

  if (intent === "cells") {
    const all: [number, number][] = [];
    for (let t = 0; t < roll.tracks.length; t++) {
      for (let b = 0; b < roll.n_bars; b++) all.push([t, b]);
    }
    const limit = Math.max(1, all.length - 1);
    const take = randInt(rand, 1, limit);
    const shuffled = all.sort(() => rand() - 0.5).slice(0, take);
    const cells = new Set(shuffled.map(([t, b]) => `${t}:${b}`));
    state = { ...state, cells };
  } else if (intent === "marks") {
    const take = randInt(rand, 1, roll.tracks.length);
    const marks = new Set<number>();
    while (marks.size < take) marks.add(randInt(rand, 0, roll.tracks.length - 1));
    state = { ...state, trackMarks: marks };
  } else {
    const count = randInt(rand, 1, 3);
    const newTracks: TrackForm[] = [];
    for (let i = 0; i < count; i++) {
      const full = rand() < 0.3;
      const instruments = full
        ? allInstruments()
        : Array.from({ length: randInt(rand, 1, 5) }, () => randInt(rand, 0, 128));
      newTracks.push({
        instruments: [...new Set(instruments)],
        density: rand() < 0.5 ? null : randInt(rand, 0, 9),
      });
    }
    state = { ...state, newTracks };
  }

  state = setSampler(state, {
    temperature: rand() < 0.5 ? 1.0 : Math.round((0.1 + rand() * 1.9) * 100) / 100,
    topP: rand() < 0.5 ? 1.0 : Math.round((0.05 + rand() * 0.95) * 100) / 100,
    seed: rand() < 0.5 ? null : randInt(rand, 0, 2 ** 31),
    maxSteps: rand() < 0.5 ? null : randInt(rand, 64, 4096),
  });
  return { state, intent };
}
