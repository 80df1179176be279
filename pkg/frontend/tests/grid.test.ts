import { describe, expect, it } from "vitest";

import { buildGridModel, LABEL_WIDTH, SUBDIVISION_WIDTH } from "../src/grid.js";
import { fixtureRoll, mulberry32, randomRoll } from "./fixtures.js";

describe("buildGridModel", () => {
  it("matches the pinned snapshot for the fixture piece", () => {
    expect(buildGridModel(fixtureRoll())).toMatchSnapshot();
  });

  it("is deterministic", () => {
    const a = buildGridModel(fixtureRoll());
    const b = buildGridModel(fixtureRoll());
    expect(a).toEqual(b);
  });

  it("lays out one band per track and one cell per (track, bar)", () => {
    const roll = fixtureRoll();
    const model = buildGridModel(roll);
    expect(model.bands).toHaveLength(2);
    expect(model.cells).toHaveLength(4);
    expect(model.nBars).toBe(2);
    const ys = model.bands.map((band) => band.y);
    expect([...ys].sort((a, b) => a - b)).toEqual(ys);
  });

  it("renders an empty bar as an empty band cell", () => {
    const model = buildGridModel(fixtureRoll());
    const notesInDrumsBar1 = model.notes.filter((n) => n.track === 1 && n.bar === 1);
    expect(notesInDrumsBar1).toHaveLength(0);
    expect(model.cells.find((c) => c.track === 1 && c.bar === 1)).toBeDefined();
  });

  it("marks selected cells and marked tracks", () => {
    const model = buildGridModel(fixtureRoll(), new Set(["0:1"]), new Set([1]));
    const selected = model.cells.filter((c) => c.selected);
    expect(selected).toEqual([expect.objectContaining({ track: 0, bar: 1 })]);
    expect(model.bands[1].marked).toBe(true);
    expect(model.bands[0].marked).toBe(false);
  });

  it("places every source note at bar * 48 + onset inside its band", () => {
    const rand = mulberry32(7);
    for (let i = 0; i < 50; i++) {
      const roll = randomRoll(rand);
      const model = buildGridModel(roll);
      roll.tracks.forEach((track, t) => {
        track.bars.forEach((bar, b) => {
          for (const note of bar) {
            const x = LABEL_WIDTH + (b * 48 + note.onset) * SUBDIVISION_WIDTH;
            const rect = model.notes.find(
              (r) => r.track === t && r.bar === b && r.pitch === note.pitch && r.x === x,
            );
            expect(rect).toBeDefined();
            const band = model.bands[t];
            expect(rect!.y).toBeGreaterThanOrEqual(band.y);
            expect(rect!.y + rect!.height).toBeLessThanOrEqual(band.y + band.height);
            expect(rect!.width).toBe((note.offset - note.onset) * SUBDIVISION_WIDTH);
          }
        });
      });
    }
  });

  it("names instruments including the drum sentinel", () => {
    const model = buildGridModel(fixtureRoll());
    expect(model.bands[0].name).toBe("Acoustic Grand Piano");
    expect(model.bands[1].name).toBe("Drum Kit");
  });
});
