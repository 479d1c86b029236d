/**
 * Projection and layout checks for the DOM-free path viewer.
 */

import { describe, expect, it } from "vitest";
import type { Frame, PlanDoc } from "../src/api.js";
import { drawPath, projectIso } from "../src/viewer.js";

const IDENTITY_ROT = [1, 0, 0, 0, 1, 0];

function frameAt(trans: number[], rot6d: number[] = IDENTITY_ROT): Frame {
  return { rot6d, trans, focal: 1.0 };
}

function mulberry(seed: number): () => number {
  // small deterministic PRNG so the property tests are reproducible
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomFrames(n: number, seed: number): Frame[] {
  const rnd = mulberry(seed);
  return Array.from({ length: n }, () =>
    frameAt([rnd() * 4 - 2, rnd() * 2 - 1, rnd() * 4 - 2]),
  );
}

describe("drawPath", () => {
  it("passes world translations through verbatim", () => {
    const frames = randomFrames(24, 11);
    const drawing = drawPath(frames);
    expect(drawing.world).toEqual(frames.map((f) => f.trans));
    expect(drawing.points).toHaveLength(frames.length);
  });

  it("keeps every projected point inside the padded canvas", () => {
    for (const seed of [1, 2, 3, 4]) {
      const drawing = drawPath(randomFrames(40, seed), null, {
        width: 640,
        height: 400,
        pad: 24,
      });
      for (const [x, y] of drawing.points) {
        expect(x).toBeGreaterThanOrEqual(24 - 1e-9);
        expect(x).toBeLessThanOrEqual(640 - 24 + 1e-9);
        expect(y).toBeGreaterThanOrEqual(24 - 1e-9);
        expect(y).toBeLessThanOrEqual(400 - 24 + 1e-9);
      }
    }
  });

  it("scales all pairwise distances by one uniform factor", () => {
    const frames = randomFrames(12, 5);
    const drawing = drawPath(frames);
    const iso = frames.map((f) => projectIso(f.trans));
    const ratios: number[] = [];
    for (let i = 0; i < frames.length; i++) {
      for (let j = i + 1; j < frames.length; j++) {
        const dIso = Math.hypot(iso[i]![0] - iso[j]![0], iso[i]![1] - iso[j]![1]);
        if (dIso < 1e-6) continue;
        const dPix = Math.hypot(
          drawing.points[i]![0] - drawing.points[j]![0],
          drawing.points[i]![1] - drawing.points[j]![1],
        );
        ratios.push(dPix / dIso);
      }
    }
    expect(ratios.length).toBeGreaterThan(0);
    for (const r of ratios) {
      expect(r).toBeCloseTo(ratios[0]!, 9);
    }
  });

  it("projects the identity-rotation view axis down-screen and to the right", () => {
    // identity rotation looks along world -z, which the isometric view maps
    // to (cos 30, -1/2): rightward and up on screen
    const drawing = drawPath([frameAt([0, 0, 0]), frameAt([1, 0, 0])]);
    const dir = drawing.frusta[0]!.dir;
    expect(dir[0]).toBeCloseTo(Math.sqrt(3) / 2, 12);
    expect(dir[1]).toBeCloseTo(-0.5, 12);
  });

  it("handles a static path without NaN coordinates", () => {
    const frames = Array.from({ length: 9 }, () => frameAt([0.3, -0.1, 0.8]));
    const drawing = drawPath(frames);
    for (const [x, y] of drawing.points) {
      expect(Number.isFinite(x)).toBe(true);
      expect(Number.isFinite(y)).toBe(true);
      expect(x).toBeCloseTo(320, 9);
      expect(y).toBeCloseTo(200, 9);
    }
    expect(drawing.polyline).not.toContain("NaN");
  });

  it("samples frusta sparsely but always includes the final frame", () => {
    const frames = randomFrames(100, 9);
    const drawing = drawPath(frames, null, { maxFrusta: 12 });
    expect(drawing.frusta.length).toBeLessThanOrEqual(13);
    const indices = drawing.frusta.map((f) => f.index);
    expect(indices[0]).toBe(0);
    expect(indices[indices.length - 1]).toBe(99);
    expect([...indices].sort((a, b) => a - b)).toEqual(indices);
  });

  it("marks endpoint anchors and skips interior ones", () => {
    const frames = randomFrames(20, 3);
    const plan: PlanDoc = {
      version: 1,
      steps: [
        { type: "anchor", prompt: "the fountain", role: "start", attaches_to: 0 },
        { type: "atomic", prompt: "pan left" },
        { type: "anchor", prompt: "the bench", role: "end", attaches_to: 0 },
        { type: "atomic", prompt: "dolly in" },
        { type: "anchor", prompt: "the statue", role: "end", attaches_to: 1 },
      ],
    };
    const drawing = drawPath(frames, plan);
    // the "end of step 0" anchor sits at an interior junction the viewer
    // cannot place, so only the two endpoint anchors are drawn
    expect(drawing.anchors).toHaveLength(2);
    expect(drawing.anchors[0]).toEqual({
      role: "start",
      prompt: "the fountain",
      point: drawing.points[0],
    });
    expect(drawing.anchors[1]).toEqual({
      role: "end",
      prompt: "the statue",
      point: drawing.points[drawing.points.length - 1],
    });
  });

  it("returns an empty drawing for an empty trajectory", () => {
    const drawing = drawPath([]);
    expect(drawing.points).toEqual([]);
    expect(drawing.polyline).toBe("");
    expect(drawing.frusta).toEqual([]);
  });
});
