/**
 * Typed client for the trajectory service's /v1 HTTP API.
 *
 * Every interaction with the server goes through this module; nothing else
 * in the studio talks to the network. Response bodies are returned as the
 * server sent them (the export endpoint even as raw text) so displayed data
 * stays traceable to a server response.
 */

export type Frame = {
  rot6d: number[];
  trans: number[];
  focal: number;
};

export type TrajectoryDoc = {
  duration_s: number;
  frames: Frame[];
};

export type AtomicStepDoc = {
  type: "atomic";
  prompt: string;
  duration_hint?: number;
};

export type AnchorStepDoc = {
  type: "anchor";
  prompt: string;
  role: "start" | "end";
  attaches_to: number;
};

export type PlanDoc = {
  version: number;
  steps: (AtomicStepDoc | AnchorStepDoc)[];
};

export type ToolCall = {
  tool: string;
  step: number;
  inputs: Record<string, unknown>;
  output: string;
};

export type TraceDoc = {
  observation: string;
  reasoning: string;
  calls: ToolCall[];
};

export type SamplerSpec = {
  mode?: "greedy" | "top_k" | "nucleus";
  temperature?: number;
  top_k?: number;
  top_p?: number;
  max_new_tokens?: number;
};

export type GenerateRequest = {
  prompt: string;
  scene_id?: string;
  seed?: number;
  sampler?: SamplerSpec;
};

export type GenerateResponse = {
  trajectory: TrajectoryDoc;
  trajectory_id: string;
  plan: PlanDoc;
  trace: TraceDoc;
  seed: number;
  warnings: string[];
};

export type PlanResponse = {
  plan: PlanDoc;
  planner: "remote" | "grammar";
};

export type AnchorRequest = {
  prompt: string;
  scene_id: string;
  refine?: boolean;
};

export type AnchorResponse = {
  camera: Frame;
  score: number;
  source_image_id: string;
  refinement_steps: number;
  outside_bounds: boolean;
};

export type SceneSummary = {
  scene_id: string;
  image_count: number;
  bounds: { lo: number[]; hi: number[] } | null;
};

export type HealthResponse = {
  status: string;
  models_loaded: boolean;
  scene_count: number;
};

/** Server-reported failure: carries the machine-readable error code. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly planStep: number | null;

  constructor(status: number, code: string, message: string, planStep?: number) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.planStep = planStep ?? null;
  }
}

export type Client = {
  readonly baseUrl: string;
  health(): Promise<HealthResponse>;
  scenes(): Promise<SceneSummary[]>;
  generate(req: GenerateRequest): Promise<GenerateResponse>;
  plan(prompt: string): Promise<PlanResponse>;
  anchor(req: AnchorRequest): Promise<AnchorResponse>;
  /** Raw body of the camera-path export, byte-for-byte as served. */
  exportCameraPath(trajectoryId: string): Promise<string>;
};

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let code = `Http${res.status}`;
  let message = res.statusText;
  let planStep: number | undefined;
  try {
    const body = (await res.json()) as {
      error?: string;
      message?: string;
      plan_step?: number;
    };
    if (body.error) code = body.error;
    if (body.message) message = body.message;
    planStep = body.plan_step;
  } catch {
    // non-JSON error body: keep the HTTP status text
  }
  throw new ApiError(res.status, code, message, planStep);
}

export function createClient(baseUrl: string, fetchImpl: typeof fetch = fetch): Client {
  const base = baseUrl.replace(/\/+$/, "");

  async function getJson<T>(path: string): Promise<T> {
    const res = await fetchImpl(`${base}${path}`);
    await raiseForStatus(res);
    return (await res.json()) as T;
  }

  async function postJson<T>(path: string, body: unknown): Promise<T> {
    const res = await fetchImpl(`${base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(res);
    return (await res.json()) as T;
  }

  return {
    baseUrl: base,
    health: () => getJson<HealthResponse>("/v1/health"),
    scenes: () => getJson<SceneSummary[]>("/v1/scenes"),
    generate: (req) => postJson<GenerateResponse>("/v1/generate", req),
    plan: (prompt) => postJson<PlanResponse>("/v1/plan", { prompt }),
    anchor: (req) => postJson<AnchorResponse>("/v1/anchor", req),
    exportCameraPath: async (trajectoryId) => {
      const res = await fetchImpl(
        `${base}/v1/trajectory/${encodeURIComponent(trajectoryId)}/export?format=camera_path`
      );
      await raiseForStatus(res);
      return res.text();
    },
  };
}
