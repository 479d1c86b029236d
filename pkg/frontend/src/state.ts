/**
 * Session store for the studio: prompt history, active scene, selected
 * trajectory, playback cursor.
 *
 * Framework-free so the concurrency rules are testable in isolation. The
 * session keeps at most one generation "live": each submission gets a
 * sequence number, and a response is applied only if its request is still
 * the newest one. Superseded responses are marked stale and dropped, never
 * displayed. History is append-only: entries change status in place but are
 * never removed or reordered.
 */

import { ApiError } from "./api.js";
import type { Client, GenerateResponse } from "./api.js";

export type EntryStatus = "pending" | "done" | "error" | "stale";

export type HistoryEntry = {
  seq: number;
  prompt: string;
  status: EntryStatus;
  trajectoryId: string | null;
  error: { code: string; message: string } | null;
};

export type ViewerCamera = {
  trans: number[];
  rot6d: number[];
  focal: number;
  fovDeg: number;
};

export type SessionState = {
  history: HistoryEntry[];
  activeSceneId: string | null;
  selected: GenerateResponse | null;
  frameIndex: number;
};

export type ExportFile = {
  filename: string;
  /** Byte-for-byte body of the server's export endpoint. */
  content: string;
};

export type Session = {
  readonly state: SessionState;
  submitPrompt(prompt: string): Promise<void>;
  scrubPlayback(index: number): ViewerCamera | null;
  viewerCamera(): ViewerCamera | null;
  exportPath(): Promise<ExportFile | null>;
  selectScene(sceneId: string | null): void;
  subscribe(listener: () => void): () => void;
};

/** Same focal-to-FOV convention as the server's camera-path export. */
export function fovDegOf(focal: number): number {
  return (2 * Math.atan(0.5 / focal) * 180) / Math.PI;
}

export function createSession(api: Client, opts: { seed?: number } = {}): Session {
  const seed = opts.seed ?? 0;
  let lastSeq = 0;

  const state: SessionState = {
    history: [],
    activeSceneId: null,
    selected: null,
    frameIndex: 0,
  };

  const listeners = new Set<() => void>();
  const notify = () => {
    for (const fn of listeners) fn();
  };

  async function submitPrompt(prompt: string): Promise<void> {
    const mySeq = ++lastSeq;
    const entry: HistoryEntry = {
      seq: mySeq,
      prompt,
      status: "pending",
      trajectoryId: null,
      error: null,
    };
    state.history.push(entry);
    notify();

    let res: GenerateResponse;
    try {
      res = await api.generate({
        prompt,
        seed,
        ...(state.activeSceneId !== null ? { scene_id: state.activeSceneId } : {}),
      });
    } catch (err) {
      if (mySeq !== lastSeq) {
        entry.status = "stale";
        notify();
        return;
      }
      entry.status = "error";
      entry.error =
        err instanceof ApiError
          ? { code: err.code, message: err.message }
          : { code: "NetworkError", message: String(err) };
      notify();
      return;
    }

    if (mySeq !== lastSeq) {
      // a newer prompt was submitted while this one was in flight
      entry.status = "stale";
      notify();
      return;
    }

    entry.status = "done";
    entry.trajectoryId = res.trajectory_id;
    state.selected = res;
    state.frameIndex = 0;
    notify();
  }

  function viewerCamera(): ViewerCamera | null {
    if (state.selected === null) return null;
    const frame = state.selected.trajectory.frames[state.frameIndex];
    if (frame === undefined) return null;
    return {
      trans: [...frame.trans],
      rot6d: [...frame.rot6d],
      focal: frame.focal,
      fovDeg: fovDegOf(frame.focal),
    };
  }

  function scrubPlayback(index: number): ViewerCamera | null {
    if (state.selected === null) return null;
    const last = state.selected.trajectory.frames.length - 1;
    state.frameIndex = Math.min(Math.max(Math.trunc(index), 0), last);
    notify();
    return viewerCamera();
  }

  async function exportPath(): Promise<ExportFile | null> {
    if (state.selected === null) return null;
    const id = state.selected.trajectory_id;
    const content = await api.exportCameraPath(id);
    return { filename: `${id}.camera_path.json`, content };
  }

  function selectScene(sceneId: string | null): void {
    state.activeSceneId = sceneId;
    notify();
  }

  function subscribe(listener: () => void): () => void {
    listeners.add(listener);
    return () => listeners.delete(listener);
  }

  return { state, submitPrompt, scrubPlayback, viewerCamera, exportPath, selectScene, subscribe };
}
