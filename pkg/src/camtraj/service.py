"""HTTP service exposing the trajectory pipeline.

The app is a thin layer over :func:`camtraj.planner.run_pipeline`: checkpoints
and scene manifests are loaded once at startup and shared read-only, every
request carries its own seed (echoed back in the response), and generated
trajectories are kept in an in-memory content-addressed store so they can be
re-exported as camera paths without regeneration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import httpx
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .anchors import (
    RemoteEmbeddingProvider,
    Scene,
    SyntheticEmbeddingProvider,
    load_scene,
    refine_anchor,
    select_initial_anchor,
)
from .errors import CamtrajError, CheckpointError, PlanValidationFailed, RemotePlannerUnavailable, SceneNotFound
from .geometry import camera_path_dict, frame_to_dict, trajectory_to_dict
from .gpt import SamplerParams, load_gpt, save_gpt
from .planner import (
    PipelineModels,
    PLANNER_INSTRUCTIONS,
    llm_plan,
    parse_query,
    plan_to_dict,
    run_pipeline,
    trajectory_digest,
)
from .tokenizer import load_tokenizer, save_tokenizer

log = logging.getLogger(__name__)

# canonical checkpoint names inside the model directory; the CLI writes them
# and the service reads them
TOKENIZER_FILE = "tokenizer.ckpt"
GPT_FILE = "gpt.ckpt"

# the wire format of every trajectory returned by the service
TRAJECTORY_SCHEMA = {
    "type": "object",
    "required": ["duration_s", "frames"],
    "additionalProperties": False,
    "properties": {
        "duration_s": {"type": "number", "exclusiveMinimum": 0},
        "frames": {
            "type": "array",
            "minItems": 2,
            "items": {
                "type": "object",
                "required": ["rot6d", "trans", "focal"],
                "additionalProperties": False,
                "properties": {
                    "rot6d": {
                        "type": "array",
                        "minItems": 6,
                        "maxItems": 6,
                        "items": {"type": "number"},
                    },
                    "trans": {
                        "type": "array",
                        "minItems": 3,
                        "maxItems": 3,
                        "items": {"type": "number"},
                    },
                    "focal": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class ServiceConfig:
    """Startup configuration: where artifacts live and how to listen."""

    model_dir: Optional[str] = None
    scene_dir: Optional[str] = None
    host: str = "127.0.0.1"
    port: int = 8000
    default_seed: int = 0
    planner_url: Optional[str] = None
    planner_model: Optional[str] = None
    planner_api_key: Optional[str] = None
    embed_url: Optional[str] = None


def load_models(model_dir) -> Optional[PipelineModels]:
    """Load the tokenizer+gpt checkpoint pair from a model directory.

    Returns None when the directory holds neither checkpoint (the service
    then starts degraded and answers 503 on /v1/generate). A half-present or
    incompatible pair is an operator error and raises CheckpointError.
    """
    if model_dir is None:
        return None
    d = Path(model_dir)
    tok_path, gpt_path = d / TOKENIZER_FILE, d / GPT_FILE
    if not tok_path.exists() and not gpt_path.exists():
        return None
    if not tok_path.exists() or not gpt_path.exists():
        missing = TOKENIZER_FILE if not tok_path.exists() else GPT_FILE
        raise CheckpointError(f"model directory {d} is missing {missing}")
    tok = load_tokenizer(tok_path)
    model = load_gpt(gpt_path)
    if model.vocab.codebook_size != tok.config.codebook_size:
        raise CheckpointError(
            f"incompatible checkpoints: gpt expects a codebook of "
            f"{model.vocab.codebook_size}, tokenizer has {tok.config.codebook_size}"
        )
    return PipelineModels(tokenizer=tok, model=model)


def save_models(models: PipelineModels, model_dir) -> None:
    d = Path(model_dir)
    d.mkdir(parents=True, exist_ok=True)
    save_tokenizer(models.tokenizer, d / TOKENIZER_FILE)
    save_gpt(models.model, d / GPT_FILE)


def scan_scenes(scene_dir) -> dict:
    """Load every *.json manifest under scene_dir; bad ones are skipped."""
    scenes = {}
    if scene_dir is None:
        return scenes
    d = Path(scene_dir)
    if not d.is_dir():
        return scenes
    for path in sorted(d.glob("*.json")):
        try:
            scene = load_scene(path)
        except (ValueError, KeyError, TypeError, OSError) as err:
            log.warning("skipping scene manifest %s: %s", path.name, err)
            continue
        scenes[scene.scene_id] = scene
    return scenes


def remote_planner_client(url: str, model: Optional[str] = None, api_key: Optional[str] = None, timeout: float = 30.0):
    """Callable(instruction) -> text against a chat-completion style endpoint.

    Transport failures are re-raised as ConnectionError so the pipeline's
    grammar fallback kicks in rather than surfacing an HTTP 500.
    """

    def client(instruction: str) -> str:
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        payload = {"prompt": instruction}
        if model:
            payload["model"] = model
        try:
            resp = httpx.post(url, json=payload, headers=headers, timeout=timeout)
            resp.raise_for_status()
            return str(resp.json()["text"])
        except httpx.HTTPError as err:
            raise ConnectionError(f"remote planner at {url}: {err}") from err

    return client


class SamplerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: str = "greedy"
    temperature: float = 1.0
    top_k: int = 10
    top_p: float = 0.9
    max_new_tokens: int = 40


class GenerateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prompt: str
    scene_id: Optional[str] = None
    seed: Optional[int] = None
    sampler: Optional[SamplerSpec] = None


class PlanRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prompt: str


class AnchorRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prompt: str
    scene_id: str
    refine: bool = False


def _error_body(code: str, message: str, **extra) -> dict:
    body = {"error": code, "message": message}
    body.update(extra)
    return body


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="camtraj", docs_url=None, redoc_url=None)
    # the browser studio is served from its own origin; single-user desk
    # tool with no credentials, so a wildcard is fine
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.config = config
    app.state.models = load_models(config.model_dir)
    app.state.scenes = scan_scenes(config.scene_dir)
    app.state.trajectories = {}
    app.state.planner_client = (
        remote_planner_client(config.planner_url, config.planner_model, config.planner_api_key)
        if config.planner_url
        else None
    )

    def provider_for(scene: Scene):
        if config.embed_url:
            return RemoteEmbeddingProvider(config.embed_url, dim=scene.embedding_dim)
        return SyntheticEmbeddingProvider(dim=scene.embedding_dim)

    def get_scene(scene_id: str) -> Scene:
        scene = app.state.scenes.get(scene_id)
        if scene is None:
            raise SceneNotFound(f"no scene with id {scene_id!r}")
        return scene

    @app.exception_handler(CamtrajError)
    async def camtraj_error(request: Request, exc: CamtrajError):
        status = 404 if isinstance(exc, SceneNotFound) else 400
        extra = {}
        if hasattr(exc, "plan_step"):
            extra["plan_step"] = exc.plan_step
        return JSONResponse(status_code=status, content=_error_body(exc.code, str(exc), **extra))

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content=_error_body("ValidationError", str(exc.errors()[:1])))

    @app.exception_handler(Exception)
    async def unexpected_error(request: Request, exc: Exception):
        # contract: 5xx bodies never leak stack traces
        log.exception("unhandled error on %s", request.url.path)
        return JSONResponse(status_code=500, content=_error_body("InternalError", "internal server error"))

    @app.get("/v1/health")
    async def health():
        return {
            "status": "ok",
            "models_loaded": app.state.models is not None,
            "scene_count": len(app.state.scenes),
        }

    @app.get("/v1/scenes")
    async def scenes():
        out = []
        for sid in sorted(app.state.scenes):
            scene = app.state.scenes[sid]
            out.append(
                {
                    "scene_id": sid,
                    "image_count": len(scene.images),
                    "bounds": {
                        "lo": [float(x) for x in scene.bounds[0]],
                        "hi": [float(x) for x in scene.bounds[1]],
                    },
                }
            )
        return out

    @app.post("/v1/generate")
    async def generate(req: GenerateRequest):
        if app.state.models is None:
            return JSONResponse(
                status_code=503,
                content=_error_body("ModelsNotLoaded", "no model checkpoints loaded; train or point --model-dir at them"),
            )
        scene = get_scene(req.scene_id) if req.scene_id is not None else None
        seed = config.default_seed if req.seed is None else int(req.seed)
        sampler = SamplerParams(**req.sampler.model_dump()) if req.sampler else None
        traj, plan, trace = run_pipeline(
            req.prompt,
            app.state.models,
            scene=scene,
            provider=provider_for(scene) if scene is not None else None,
            seed=seed,
            sampler=sampler,
            planner_client=app.state.planner_client,
        )
        digest = trajectory_digest(traj)
        app.state.trajectories[digest] = traj
        warnings = [c["output"] for c in trace.calls if "outside scene bounds" in c["output"]]
        return {
            "trajectory": trajectory_to_dict(traj),
            "trajectory_id": digest,
            "plan": plan_to_dict(plan),
            "trace": trace.to_dict(include_timings=False),
            "seed": seed,
            "warnings": warnings,
        }

    @app.post("/v1/plan")
    async def plan_only(req: PlanRequest):
        source = "grammar"
        if app.state.planner_client is not None:
            try:
                plan = llm_plan(req.prompt, app.state.planner_client)
                source = "remote"
            except (RemotePlannerUnavailable, PlanValidationFailed):
                plan = parse_query(req.prompt)
        else:
            plan = parse_query(req.prompt)
        return {"plan": plan_to_dict(plan), "planner": source}

    @app.post("/v1/anchor")
    async def anchor(req: AnchorRequest):
        scene = get_scene(req.scene_id)
        provider = provider_for(scene)
        if req.refine:
            result = refine_anchor(scene, provider, req.prompt)
        else:
            result = select_initial_anchor(scene, provider, req.prompt)
        return {
            "camera": frame_to_dict(result.camera),
            "score": float(result.score),
            "source_image_id": result.source_image_id,
            "refinement_steps": result.refinement_steps,
            "outside_bounds": result.outside_bounds,
        }

    @app.get("/v1/trajectory/{trajectory_id}/export")
    async def export(trajectory_id: str, format: str = "camera_path"):
        if format != "camera_path":
            return JSONResponse(
                status_code=400,
                content=_error_body("UnknownFormat", f"unsupported export format {format!r}"),
            )
        traj = app.state.trajectories.get(trajectory_id)
        if traj is None:
            return JSONResponse(
                status_code=404,
                content=_error_body("TrajectoryNotFound", f"no stored trajectory {trajectory_id!r}"),
            )
        return camera_path_dict(traj)

    return app


def run_service(config: ServiceConfig) -> None:
    """Blocking uvicorn entry point used by the CLI serve verb."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
