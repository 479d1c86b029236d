/**
 * Session-store behavior against a hand-rolled fake client: stale-response
 * dropping, error handling, append-only history, playback clamping.
 */

import { describe, expect, it } from "vitest";
import { ApiError } from "../src/api.js";
import type { Client, GenerateRequest, GenerateResponse } from "../src/api.js";
import { createSession, fovDegOf } from "../src/state.js";

type Deferred<T> = {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (reason: unknown) => void;
};

function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (reason: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

function response(id: string, nFrames = 3): GenerateResponse {
  const frames = Array.from({ length: nFrames }, (_, i) => ({
    rot6d: [1, 0, 0, 0, 1, 0],
    trans: [i * 0.1, 0, i * -0.2],
    focal: 1.25,
  }));
  return {
    trajectory: { duration_s: 4.0, frames },
    trajectory_id: id,
    plan: { version: 1, steps: [{ type: "atomic", prompt: "pan left" }] },
    trace: { observation: "", reasoning: "", calls: [] },
    seed: 0,
    warnings: [],
  };
}

/** Client whose generate() hands back one queued deferred per call. */
function fakeClient() {
  const pending: Deferred<GenerateResponse>[] = [];
  const requests: GenerateRequest[] = [];
  let exportBody = "";
  const client: Client = {
    baseUrl: "http://fake",
    health: () => Promise.reject(new Error("unused")),
    scenes: () => Promise.resolve([]),
    generate: (req) => {
      requests.push(req);
      const d = deferred<GenerateResponse>();
      pending.push(d);
      return d.promise;
    },
    plan: () => Promise.reject(new Error("unused")),
    anchor: () => Promise.reject(new Error("unused")),
    exportCameraPath: () => Promise.resolve(exportBody),
  };
  return {
    client,
    requests,
    setExportBody: (b: string) => {
      exportBody = b;
    },
    takePending: (i: number) => {
      const d = pending[i];
      if (d === undefined) throw new Error(`no pending request ${i}`);
      return d;
    },
  };
}

describe("stale response dropping", () => {
  it("keeps the newest response when the older request resolves last", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client);

    const pA = session.submitPrompt("pan left");
    const pB = session.submitPrompt("dolly in");

    fake.takePending(1).resolve(response("traj-b"));
    await pB;
    fake.takePending(0).resolve(response("traj-a"));
    await pA;

    expect(session.state.selected?.trajectory_id).toBe("traj-b");
    expect(session.state.history.map((e) => e.status)).toEqual(["stale", "done"]);
  });

  it("keeps the newest response when requests resolve in submission order", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client);

    const pA = session.submitPrompt("pan left");
    const pB = session.submitPrompt("dolly in");

    fake.takePending(0).resolve(response("traj-a"));
    await pA;
    fake.takePending(1).resolve(response("traj-b"));
    await pB;

    expect(session.state.selected?.trajectory_id).toBe("traj-b");
    expect(session.state.history.map((e) => e.status)).toEqual(["stale", "done"]);
  });

  it("marks a superseded failure stale rather than error", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client);

    const pA = session.submitPrompt("pan left");
    const pB = session.submitPrompt("dolly in");

    fake.takePending(0).reject(new ApiError(400, "UnparsableQuery", "no parse"));
    await pA;
    fake.takePending(1).resolve(response("traj-b"));
    await pB;

    expect(session.state.history[0]?.status).toBe("stale");
    expect(session.state.history[0]?.error).toBeNull();
    expect(session.state.selected?.trajectory_id).toBe("traj-b");
  });
});

describe("error handling", () => {
  it("records the error code and leaves the previous selection intact", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client);

    const pA = session.submitPrompt("pan left");
    fake.takePending(0).resolve(response("traj-a"));
    await pA;
    const camBefore = session.viewerCamera();

    const pB = session.submitPrompt("?!");
    fake.takePending(1).reject(new ApiError(400, "UnparsableQuery", "no parse"));
    await pB;

    const entry = session.state.history[1];
    expect(entry?.status).toBe("error");
    expect(entry?.error).toEqual({ code: "UnparsableQuery", message: "no parse" });
    expect(session.state.selected?.trajectory_id).toBe("traj-a");
    expect(session.viewerCamera()).toEqual(camBefore);
  });

  it("wraps non-HTTP failures as NetworkError", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client);

    const p = session.submitPrompt("pan left");
    fake.takePending(0).reject(new TypeError("fetch failed"));
    await p;

    expect(session.state.history[0]?.error?.code).toBe("NetworkError");
  });
});

describe("history and requests", () => {
  it("appends entries in submission order and never rewrites prompts", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client);

    const prompts = ["pan left", "dolly in", "orbit right"];
    const settled = prompts.map((p) => session.submitPrompt(p));
    for (let i = 0; i < prompts.length; i++) {
      fake.takePending(i).resolve(response(`traj-${i}`));
    }
    await Promise.all(settled);

    expect(session.state.history.map((e) => e.prompt)).toEqual(prompts);
    expect(session.state.history.map((e) => e.seq)).toEqual([1, 2, 3]);
  });

  it("sends the active scene id and a fixed seed with each request", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client, { seed: 7 });

    session.selectScene("courtyard");
    const p = session.submitPrompt("pan left");
    fake.takePending(0).resolve(response("traj-a"));
    await p;

    expect(fake.requests[0]).toEqual({ prompt: "pan left", seed: 7, scene_id: "courtyard" });
  });
});

describe("playback and export", () => {
  it("clamps the scrub index to the frame range", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client);
    const p = session.submitPrompt("pan left");
    fake.takePending(0).resolve(response("traj-a", 5));
    await p;

    session.scrubPlayback(99);
    expect(session.state.frameIndex).toBe(4);
    session.scrubPlayback(-3);
    expect(session.state.frameIndex).toBe(0);
    const cam = session.scrubPlayback(2.9);
    expect(session.state.frameIndex).toBe(2);
    expect(cam?.trans).toEqual([0.2, 0, -0.4]);
    expect(cam?.fovDeg).toBeCloseTo(fovDegOf(1.25), 12);
  });

  it("is a no-op without a selected trajectory", () => {
    const fake = fakeClient();
    const session = createSession(fake.client);
    expect(session.scrubPlayback(3)).toBeNull();
    expect(session.viewerCamera()).toBeNull();
  });

  it("export returns the raw server body, or null with nothing selected", async () => {
    const fake = fakeClient();
    const session = createSession(fake.client);
    expect(await session.exportPath()).toBeNull();

    const p = session.submitPrompt("pan left");
    fake.takePending(0).resolve(response("traj-a"));
    await p;
    fake.setExportBody('{"camera_path": []}\n');

    const file = await session.exportPath();
    expect(file?.content).toBe('{"camera_path": []}\n');
    expect(file?.filename).toBe("traj-a.camera_path.json");
  });
});

describe("fovDegOf", () => {
  it("matches the export convention at focal 0.5 (90 degrees)", () => {
    expect(fovDegOf(0.5)).toBeCloseTo(90, 12);
  });
});
