/**
 * Pure path-drawing math for the trajectory viewer.
 *
 * Produces SVG-ready geometry from a trajectory document without touching
 * the DOM, so every displayed coordinate can be checked against the server
 * response that produced it. `world` is the untransformed translation of
 * each frame, copied verbatim; the projected `points` are a fixed isometric
 * view of those translations, uniformly scaled to fit the canvas.
 */

import type { Frame, PlanDoc } from "./api.js";

export type Frustum = {
  /** Frame index this marker was taken from. */
  index: number;
  tip: [number, number];
  /** Unit screen-space view direction. */
  dir: [number, number];
};

export type AnchorMarker = {
  role: "start" | "end";
  prompt: string;
  point: [number, number];
};

export type PathDrawing = {
  /** Verbatim per-frame translations from the response body. */
  world: number[][];
  /** Canvas coordinates, one per frame, in frame order. */
  points: [number, number][];
  /** `points` joined for an SVG <polyline> element. */
  polyline: string;
  frusta: Frustum[];
  anchors: AnchorMarker[];
  viewBox: string;
};

export type DrawOptions = {
  width?: number;
  height?: number;
  pad?: number;
  maxFrusta?: number;
};

const COS30 = Math.sqrt(3) / 2;

/** Fixed isometric projection of a world point onto the drawing plane. */
export function projectIso(p: number[]): [number, number] {
  const x = p[0] ?? 0;
  const y = p[1] ?? 0;
  const z = p[2] ?? 0;
  // v decreases as world y increases, so higher cameras draw higher up
  return [(x - z) * COS30, (x + z) * 0.5 - y];
}

function viewDirection(rot6d: number[]): [number, number, number] {
  const a: [number, number, number] = [rot6d[0] ?? 0, rot6d[1] ?? 0, rot6d[2] ?? 0];
  const b: [number, number, number] = [rot6d[3] ?? 0, rot6d[4] ?? 0, rot6d[5] ?? 0];
  const an = Math.hypot(a[0], a[1], a[2]);
  if (an < 1e-9) return [0, 0, -1];
  const c1: [number, number, number] = [a[0] / an, a[1] / an, a[2] / an];
  const d = b[0] * c1[0] + b[1] * c1[1] + b[2] * c1[2];
  const bp: [number, number, number] = [b[0] - d * c1[0], b[1] - d * c1[1], b[2] - d * c1[2]];
  const bn = Math.hypot(bp[0], bp[1], bp[2]);
  if (bn < 1e-9) return [0, 0, -1];
  const c2: [number, number, number] = [bp[0] / bn, bp[1] / bn, bp[2] / bn];
  // camera looks down the negative third column of its rotation
  return [
    -(c1[1] * c2[2] - c1[2] * c2[1]),
    -(c1[2] * c2[0] - c1[0] * c2[2]),
    -(c1[0] * c2[1] - c1[1] * c2[0]),
  ];
}

function round2(x: number): number {
  return Math.round(x * 100) / 100;
}

export function drawPath(
  frames: Frame[],
  plan: PlanDoc | null = null,
  opts: DrawOptions = {},
): PathDrawing {
  const width = opts.width ?? 640;
  const height = opts.height ?? 400;
  const pad = opts.pad ?? 24;
  const maxFrusta = opts.maxFrusta ?? 12;
  const viewBox = `0 0 ${width} ${height}`;

  const world = frames.map((f) => [...f.trans]);
  const iso = world.map(projectIso);

  if (iso.length === 0) {
    return { world, points: [], polyline: "", frusta: [], anchors: [], viewBox };
  }

  let minU = Infinity;
  let maxU = -Infinity;
  let minV = Infinity;
  let maxV = -Infinity;
  for (const [u, v] of iso) {
    if (u < minU) minU = u;
    if (u > maxU) maxU = u;
    if (v < minV) minV = v;
    if (v > maxV) maxV = v;
  }
  const spanU = maxU - minU;
  const spanV = maxV - minV;
  // uniform scale keeps distance ratios; a static path just sits centered
  const scale =
    Math.max(spanU, spanV) > 1e-12
      ? Math.min((width - 2 * pad) / Math.max(spanU, 1e-12), (height - 2 * pad) / Math.max(spanV, 1e-12))
      : 1;
  const cu = (minU + maxU) / 2;
  const cv = (minV + maxV) / 2;
  const toCanvas = ([u, v]: [number, number]): [number, number] => [
    width / 2 + (u - cu) * scale,
    height / 2 + (v - cv) * scale,
  ];

  const points = iso.map(toCanvas);
  const polyline = points.map(([x, y]) => `${round2(x)},${round2(y)}`).join(" ");

  const frusta: Frustum[] = [];
  const stride = Math.max(1, Math.ceil(frames.length / maxFrusta));
  for (let i = 0; i < frames.length; i += stride) {
    frusta.push(frustumAt(frames, points, i));
  }
  const last = frames.length - 1;
  if (frusta.length === 0 || frusta[frusta.length - 1]!.index !== last) {
    frusta.push(frustumAt(frames, points, last));
  }

  const anchors: AnchorMarker[] = [];
  if (plan !== null) {
    const atomicCount = plan.steps.filter((s) => s.type === "atomic").length;
    for (const step of plan.steps) {
      if (step.type !== "anchor") continue;
      // only the path endpoints are identifiable without per-step frame
      // counts; interior junction anchors are skipped
      if (step.role === "start" && step.attaches_to === 0) {
        anchors.push({ role: "start", prompt: step.prompt, point: points[0]! });
      } else if (step.role === "end" && step.attaches_to === atomicCount - 1) {
        anchors.push({ role: "end", prompt: step.prompt, point: points[points.length - 1]! });
      }
    }
  }

  return { world, points, polyline, frusta, anchors, viewBox };
}

function frustumAt(frames: Frame[], points: [number, number][], i: number): Frustum {
  const f = frames[i]!;
  const dir3 = viewDirection(f.rot6d);
  const du = (dir3[0] - dir3[2]) * COS30;
  const dv = (dir3[0] + dir3[2]) * 0.5 - dir3[1];
  const n = Math.hypot(du, dv);
  // a view axis parallel to the projection axis has no on-screen direction
  const dir: [number, number] = n < 1e-9 ? [0, -1] : [du / n, dv / n];
  return { index: i, tip: points[i]!, dir };
}
