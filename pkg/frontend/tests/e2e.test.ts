// End-to-end against the real generation service: spawns `tracksmith serve`
// (uniform predictor, grammar-masked), then drives the actual UI modules
// (state -> buildRequest -> ApiClient) over HTTP.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readdirSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { buildGridModel } from "../src/grid.js";
import { buildRequest } from "../src/request.js";
import {
  applyResult,
  currentPiece,
  goBack,
  initialState,
  loadPiece,
  setNewTrackCount,
  setSampler,
  toggleCell,
  toggleTrackMark,
  updateTrackForm,
  type UiState,
} from "../src/state.js";
import type { Pianoroll } from "../src/types.js";
import { mulberry32, randomUiState } from "./fixtures.js";

const REPO_ROOT = resolve(fileURLToPath(new URL(".", import.meta.url)), "..", "..");
const PORT = 8900 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let workdir: string;
let api: ApiClient;
let corpusRolls: { bytes: Uint8Array; roll: Pianoroll }[] = [];

function withSampler(state: UiState, seed: number): UiState {
  return setSampler(state, { seed, maxSteps: 32768 });
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "tracksmith-ui-"));
  execFileSync(
    "python3",
    [join(REPO_ROOT, "scripts", "make_corpus.py"), join(workdir, "corpus"), "--count", "6", "--max-tracks", "3", "--max-bars", "4", "--seed", "99"],
    { cwd: REPO_ROOT },
  );
  server = spawn(
    "python3",
    ["-m", "tracksmith.cli", "serve", "--port", String(PORT), "--predictor", "uniform", "--data-dir", join(workdir, "data")],
    { cwd: REPO_ROOT, stdio: "ignore" },
  );
  api = new ApiClient(BASE);
  let healthy = false;
  for (let attempt = 0; attempt < 120 && !healthy; attempt++) {
    try {
      const health = await api.health();
      healthy = health.status === "ok";
    } catch {
      await new Promise((done) => setTimeout(done, 500));
    }
  }
  if (!healthy) throw new Error("service did not become healthy");

  for (const name of readdirSync(join(workdir, "corpus")).sort()) {
    const bytes = new Uint8Array(readFileSync(join(workdir, "corpus", name)));
    const { pianoroll } = await api.uploadMidi(bytes, name);
    corpusRolls.push({ bytes, roll: pianoroll });
  }
}, 120_000);

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

function pickRoll(minTracks: number, minBars: number): Pianoroll {
  const found = corpusRolls.find(
    ({ roll }) => roll.tracks.length >= minTracks && roll.n_bars >= minBars,
  );
  expect(found, `corpus piece with >=${minTracks} tracks and >=${minBars} bars`).toBeDefined();
  return found!.roll;
}

describe("workbench flow against the live service", () => {
  it("reloaded pieces render identically", async () => {
    const roll = pickRoll(1, 1);
    const again = await api.getPiece(roll.id);
    expect(buildGridModel(again)).toEqual(buildGridModel(roll));
  });

  it(
    "generate -> back -> download round trip",
    async () => {
      const original = pickRoll(2, 2);
      let state = loadPiece(initialState(), original);
      state = withSampler(toggleCell(state, 0, 1), 7);

      const built = buildRequest(state);
      expect(built.ok).toBe(true);
      if (!built.ok) return;
      const response = await api.generate(original.id, built.request);
      state = applyResult(state, response.pianoroll);

      // locality over the wire: everything but the selected bar unchanged
      const out = response.pianoroll;
      for (let t = 0; t < original.tracks.length; t++) {
        for (let b = 0; b < original.n_bars; b++) {
          if (t === 0 && b === 1) continue;
          expect(out.tracks[t].bars[b]).toEqual(original.tracks[t].bars[b]);
        }
      }
      expect(state.history).toHaveLength(2);
      expect(state.cells.size).toBe(0);

      // determinism through the full stack: same request, same result id
      const again = await api.generate(original.id, built.request);
      expect(again.id).toBe(response.id);
      expect(again.seed).toBe(7);

      // back restores the original
      state = goBack(state);
      expect(currentPiece(state)).toEqual(original);

      // download: bytes are SMF and re-upload to the same uploaded piece
      const bytes = await api.downloadMidi(original.id);
      expect(new TextDecoder().decode(bytes.slice(0, 4))).toBe("MThd");
      const reUploaded = await api.uploadMidi(bytes, "again.mid");
      expect(reUploaded.id).toBe(original.id);
      expect(reUploaded.pianoroll).toEqual(original);
    },
    120_000,
  );

  it(
    "whole-track marks regenerate the track in place",
    async () => {
      const original = pickRoll(2, 1);
      let state = loadPiece(initialState(), original);
      state = withSampler(toggleTrackMark(state, 0), 11);
      const built = buildRequest(state);
      expect(built.ok).toBe(true);
      if (!built.ok) return;
      expect(built.request.replace_tracks).toEqual([0]);
      const response = await api.generate(original.id, built.request);
      const out = response.pianoroll;
      expect(out.tracks).toHaveLength(original.tracks.length);
      expect(out.tracks[0].instrument).toBe(original.tracks[0].instrument);
      for (let t = 1; t < original.tracks.length; t++) {
        expect(out.tracks[t]).toEqual(original.tracks[t]);
      }
    },
    120_000,
  );

  it(
    "appended tracks respect the instrument constraint",
    async () => {
      const original = pickRoll(1, 1);
      let state = loadPiece(initialState(), original);
      state = setNewTrackCount(state, 1);
      state = updateTrackForm(state, 0, { instruments: [30], density: 4 });
      state = withSampler(state, 13);
      const built = buildRequest(state);
      expect(built.ok).toBe(true);
      if (!built.ok) return;
      const response = await api.generate(original.id, built.request);
      const added = response.pianoroll.tracks.at(-1)!;
      expect(added.instrument).toBe(30);
      expect(added.density).toBe(4);
    },
    120_000,
  );

  it(
    "the server accepts a sample of random form-built requests",
    async () => {
      const rand = mulberry32(0xcafe);
      let accepted = 0;
      let attempts = 0;
      while (accepted < 25 && attempts < 200) {
        attempts += 1;
        const generated = randomUiState(rand);
        const roll = pickRoll(1, 1);
        // rebase the random intent onto a real uploaded piece
        let state = loadPiece(generated.state, roll);
        if (generated.intent === "cells") {
          state = toggleCell(state, 0, 0);
        } else if (generated.intent === "marks") {
          if (roll.tracks.length < 2) continue; // replacement needs context
          state = toggleTrackMark(state, roll.tracks.length - 1);
        } else {
          state = setNewTrackCount(state, 1);
        }
        state = withSampler(state, attempts);
        const built = buildRequest(state);
        if (!built.ok) continue;
        const response = await fetch(`${BASE}/pieces/${roll.id}/generate`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify(built.request),
        });
        expect(response.status, JSON.stringify(built.request)).toBe(200);
        accepted += 1;
      }
      expect(accepted).toBeGreaterThanOrEqual(25);
    },
    180_000,
  );
});
