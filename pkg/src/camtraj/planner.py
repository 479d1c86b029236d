"""Query planning and trajectory composition.

A compositional request like "starting from the red chair, dolly forward,
then pan right" is parsed into a Plan of atomic motion steps plus anchor
steps, each atomic is translated to a trajectory segment, anchors are
resolved against the scene, and the segments are stitched into one
continuous trajectory.
"""

import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import jsonschema
import numpy as np

from .anchors import (
    Scene,
    SyntheticEmbeddingProvider,
    refine_anchor,
    select_initial_anchor,
)
from .dataset import KIND_KEYWORDS
from .errors import (
    CamtrajError,
    EmptyScene,
    InfeasibleComposition,
    PlanValidationFailed,
    RemotePlannerUnavailable,
    UnparsableQuery,
)
from .geometry import (
    CameraFrame,
    SimilarityTransform,
    Trajectory,
    align_endpoint,
    apply_similarity,
    concatenate,
    matrix_to_rot6d,
    rot6d_to_matrix,
    slerp_matrix,
    trajectory_to_dict,
)
from .gpt import SamplerParams, TransformerLM, generate_trajectory
from .tokenizer import TokenizerNet, decode as tok_decode

__all__ = [
    "AnchorStep",
    "AtomicStep",
    "PLAN_SCHEMA",
    "Plan",
    "PipelineModels",
    "TraceLog",
    "compose",
    "llm_plan",
    "parse_query",
    "plan_from_dict",
    "plan_to_dict",
    "run_pipeline",
    "validate_plan",
]


# ---------------------------------------------------------------------------
# Plan schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtomicStep:
    """One motion request handed to the trajectory generator verbatim."""

    prompt: str
    duration_hint: Optional[float] = None


@dataclass(frozen=True)
class AnchorStep:
    """A scene-grounding request bound to one atomic step."""

    prompt: str
    role: str  # "start" | "end"
    attaches_to: int  # index into the plan's atomic steps


@dataclass(frozen=True)
class Plan:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def atomics(self) -> list:
        return [s for s in self.steps if isinstance(s, AtomicStep)]

    @property
    def anchors(self) -> list:
        return [s for s in self.steps if isinstance(s, AnchorStep)]


PLAN_SCHEMA = {
    "type": "object",
    "required": ["version", "steps"],
    "properties": {
        "version": {"const": 1},
        "steps": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["type", "prompt"],
                        "properties": {
                            "type": {"const": "atomic"},
                            "prompt": {"type": "string", "minLength": 1},
                            "duration_hint": {"type": "number", "exclusiveMinimum": 0},
                        },
                        "additionalProperties": False,
                    },
                    {
                        "type": "object",
                        "required": ["type", "prompt", "role", "attaches_to"],
                        "properties": {
                            "type": {"const": "anchor"},
                            "prompt": {"type": "string", "minLength": 1},
                            "role": {"enum": ["start", "end"]},
                            "attaches_to": {"type": "integer", "minimum": 0},
                        },
                        "additionalProperties": False,
                    },
                ]
            },
        },
    },
    "additionalProperties": False,
}


def validate_plan(plan: Plan) -> None:
    """Raise PlanValidationFailed unless all Plan invariants hold."""
    atomics = plan.atomics
    if not atomics:
        raise PlanValidationFailed("plan has no atomic step")
    seen = set()
    for s in plan.steps:
        if isinstance(s, AtomicStep):
            if not s.prompt.strip():
                raise PlanValidationFailed("atomic step has an empty prompt")
            if s.duration_hint is not None and not s.duration_hint > 0:
                raise PlanValidationFailed("duration_hint must be positive")
        elif isinstance(s, AnchorStep):
            if s.role not in ("start", "end"):
                raise PlanValidationFailed(f"anchor role {s.role!r} is not start|end")
            if not 0 <= s.attaches_to < len(atomics):
                raise PlanValidationFailed(
                    f"anchor attaches to atomic {s.attaches_to}, plan has {len(atomics)}"
                )
            key = (s.role, s.attaches_to)
            if key in seen:
                raise PlanValidationFailed(
                    f"atomic {s.attaches_to} has more than one {s.role} anchor"
                )
            seen.add(key)
        else:
            raise PlanValidationFailed(f"unknown step type {type(s).__name__}")


def plan_to_dict(plan: Plan) -> dict:
    steps = []
    for s in plan.steps:
        if isinstance(s, AtomicStep):
            d = {"type": "atomic", "prompt": s.prompt}
            if s.duration_hint is not None:
                d["duration_hint"] = float(s.duration_hint)
            steps.append(d)
        else:
            steps.append(
                {
                    "type": "anchor",
                    "prompt": s.prompt,
                    "role": s.role,
                    "attaches_to": int(s.attaches_to),
                }
            )
    return {"version": 1, "steps": steps}


def plan_from_dict(data: dict) -> Plan:
    """Schema-validate and build a Plan; raises PlanValidationFailed."""
    try:
        jsonschema.validate(data, PLAN_SCHEMA)
    except jsonschema.ValidationError as err:
        raise PlanValidationFailed(f"plan document invalid: {err.message}") from None
    steps = []
    for s in data["steps"]:
        if s["type"] == "atomic":
            steps.append(
                AtomicStep(prompt=s["prompt"], duration_hint=s.get("duration_hint"))
            )
        else:
            steps.append(
                AnchorStep(prompt=s["prompt"], role=s["role"], attaches_to=s["attaches_to"])
            )
    plan = Plan(steps=tuple(steps))
    validate_plan(plan)
    return plan


# ---------------------------------------------------------------------------
# Grammar planner
# ---------------------------------------------------------------------------

_CLAUSE_SEP = re.compile(r",|\bthen\b|\bafter\s+that\b", re.IGNORECASE)
_START_MARKER = re.compile(
    r"^start(?:ing)?\s+(?:from|at|above|near|behind)\s+(?P<prompt>.+)$", re.IGNORECASE
)
_END_MARKER = re.compile(
    r"^end(?:ing)?\s+(?:at|above|near|on|behind)\s+(?P<prompt>.+)$", re.IGNORECASE
)
_FROM_TO = re.compile(
    r"^(?P<motion>.+?)\s+from\s+(?P<start>.+?)\s+to\s+(?P<end>.+)$", re.IGNORECASE
)
_DURATION = re.compile(r"\s*\bfor\s+(?P<secs>\d+(?:\.\d+)?)\s+seconds?\b", re.IGNORECASE)


def _has_motion_keyword(text: str) -> bool:
    words = re.sub(r"[^a-z0-9\s]", " ", text.lower()).split()
    return any(w in KIND_KEYWORDS for w in words)


def parse_query(query: str) -> Plan:
    """Deterministic grammar planner.

    Clauses split on "then" / "after that" / ","; "starting from|at X" makes
    a start anchor for the following motion clause, "ending at|above X" an
    end anchor for the preceding one, and an inline "... from X to Y" binds
    both anchors to its own clause. Atomic prompts keep the clause text
    verbatim minus anchor clauses and duration phrases.
    """
    if not query or not query.strip():
        raise UnparsableQuery("empty query", span=(0, 0))

    # clause spans over the original string
    clauses = []
    pos = 0
    for m in _CLAUSE_SEP.finditer(query):
        clauses.append((pos, m.start()))
        pos = m.end()
    clauses.append((pos, len(query)))

    # first pass: classify each clause
    items = []  # ("atomic", AtomicStep, span) | ("start"/"end", prompt, span)
    for lo, hi in clauses:
        text = query[lo:hi].strip(" \t.!?")
        if not text:
            continue
        span = (lo, hi)
        m = _START_MARKER.match(text)
        if m:
            items.append(("start", m.group("prompt").strip(), span))
            continue
        m = _END_MARKER.match(text)
        if m:
            items.append(("end", m.group("prompt").strip(), span))
            continue
        hint = None
        dm = _DURATION.search(text)
        if dm:
            hint = float(dm.group("secs"))
            text = (text[: dm.start()] + text[dm.end():]).strip()
        both = _FROM_TO.match(text)
        if both and _has_motion_keyword(both.group("motion")):
            items.append(("start", both.group("start").strip(), span))
            items.append(
                ("atomic", AtomicStep(both.group("motion").strip(), hint), span)
            )
            items.append(("end", both.group("end").strip(), span))
            continue
        if not _has_motion_keyword(text):
            raise UnparsableQuery(
                f"no recognizable motion in {text!r}", span=span
            )
        items.append(("atomic", AtomicStep(text, hint), span))

    atomic_positions = [i for i, item in enumerate(items) if item[0] == "atomic"]
    if not atomic_positions:
        raise UnparsableQuery("query has no motion clause", span=(0, len(query)))

    # second pass: attach anchors to the nearest atomic in their natural
    # direction (start anchors look forward, end anchors look backward)
    atomic_index = {}
    for rank, i in enumerate(atomic_positions):
        atomic_index[i] = rank
    steps: list = []
    taken = set()
    for i, item in enumerate(items):
        if item[0] == "atomic":
            steps.append(item[1])
            continue
        role, prompt, span = item
        if role == "start":
            following = [p for p in atomic_positions if p > i]
            target = atomic_index[following[0]] if following else atomic_index[atomic_positions[-1]]
        else:
            preceding = [p for p in atomic_positions if p < i]
            target = atomic_index[preceding[-1]] if preceding else atomic_index[atomic_positions[0]]
        if (role, target) in taken:
            raise UnparsableQuery(
                f"atomic step {target} already has a {role} anchor", span=span
            )
        taken.add((role, target))
        steps.append(AnchorStep(prompt=prompt, role=role, attaches_to=target))

    plan = Plan(steps=tuple(steps))
    validate_plan(plan)
    return plan


# ---------------------------------------------------------------------------
# Remote planner
# ---------------------------------------------------------------------------

PLANNER_INSTRUCTIONS = """You translate camera-direction requests into a JSON plan.
Output only a JSON object matching this schema, nothing else:
{schema}

Each "atomic" step is one camera motion in plain words. Each "anchor" step
names a scene location and whether it is the "start" or "end" of the atomic
step at index "attaches_to" (0-based over atomic steps only).

Request: {query}
"""


def llm_plan(query: str, client: Callable[[str], str], retries: int = 1) -> Plan:
    """Plan via a remote chat-completion callable, with one repair retry.

    ``client`` maps an instruction string to raw model text. Unreachable
    endpoints raise RemotePlannerUnavailable; output that fails schema or
    invariant validation after the retry raises PlanValidationFailed.
    """
    prompt = PLANNER_INSTRUCTIONS.format(
        schema=json.dumps(PLAN_SCHEMA, indent=2), query=query
    )
    feedback = ""
    last_error = "no output"
    for _ in range(1 + max(0, int(retries))):
        try:
            raw = client(prompt + feedback)
        except (ConnectionError, TimeoutError, OSError) as err:
            raise RemotePlannerUnavailable(f"planner endpoint unreachable: {err}") from err
        try:
            body = raw.strip()
            fence = re.search(r"```(?:json)?\s*(.*?)```", body, re.DOTALL)
            if fence:
                body = fence.group(1)
            return plan_from_dict(json.loads(body))
        except (json.JSONDecodeError, PlanValidationFailed) as err:
            last_error = str(err)
            feedback = (
                f"\nYour previous output was rejected: {last_error}\n"
                "Emit only the corrected JSON object."
            )
    raise PlanValidationFailed(f"remote plan invalid after retry: {last_error}")


# ---------------------------------------------------------------------------
# Trace log
# ---------------------------------------------------------------------------


@dataclass
class TraceLog:
    """Record of what the pipeline observed, decided and called."""

    observation: str = ""
    reasoning: str = ""
    calls: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add_call(self, tool: str, step: int, inputs: dict, output: str, seconds: float) -> None:
        self.calls.append(
            {"tool": tool, "step": int(step), "inputs": inputs, "output": output}
        )
        self.timings[tool] = self.timings.get(tool, 0.0) + float(seconds)

    def count(self, tool: str) -> int:
        return sum(1 for c in self.calls if c["tool"] == tool)

    def to_dict(self, include_timings: bool = True) -> dict:
        out = {
            "observation": self.observation,
            "reasoning": self.reasoning,
            "calls": [dict(c) for c in self.calls],
        }
        if include_timings:
            out["timings"] = {k: float(v) for k, v in self.timings.items()}
        return out


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def _chord_rotation(u, v):
    """Rotation matrix taking direction u to direction v."""
    a = u / np.linalg.norm(u)
    b = v / np.linalg.norm(v)
    c = float(np.dot(a, b))
    axis = np.cross(a, b)
    n = float(np.linalg.norm(axis))
    if n < 1e-12:
        if c > 0:
            return np.eye(3)
        # opposite directions: rotate pi about any axis perpendicular to a
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-9:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        perp /= np.linalg.norm(perp)
        return 2.0 * np.outer(perp, perp) - np.eye(3)
    axis = axis / n
    angle = float(np.arctan2(n, c))
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def _blend_rotations(traj: Trajectory, start_rot, end_rot) -> Trajectory:
    """Geodesically blend a per-frame correction so the endpoint rotations
    equal start_rot / end_rot exactly; translations are untouched."""
    m = len(traj)
    c0 = start_rot @ traj.start.rotation_matrix().T
    c1 = end_rot @ traj.end.rotation_matrix().T
    frames = []
    for j, f in enumerate(traj.frames):
        alpha = j / (m - 1)
        corr = slerp_matrix(c0, c1, alpha)
        frames.append(
            CameraFrame(
                rot=matrix_to_rot6d(corr @ f.rotation_matrix()),
                trans=f.trans,
                focal=f.focal,
            )
        )
    return Trajectory(frames=tuple(frames), duration_s=traj.duration_s)


# below this, a net displacement is treated as zero when solving for scale
_DEGENERATE_CHORD = 1e-9


def _align_both(traj: Trajectory, start: CameraFrame, end: CameraFrame) -> Trajectory:
    """Pin both endpoint poses: rigid start alignment, then uniform scale and
    rotation about the start so the end translation lands exactly, then a
    geodesic rotation blend to restore both endpoint orientations."""
    placed = align_endpoint(traj, start, "start")
    u = placed.end.trans - placed.start.trans
    v = end.trans - placed.start.trans
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nv < _DEGENERATE_CHORD and nu < _DEGENERATE_CHORD:
        # both anchors coincide and the segment is a fixed-position move
        return _blend_rotations(placed, rot6d_to_matrix(start.rot), rot6d_to_matrix(end.rot))
    if nu < _DEGENERATE_CHORD:
        raise InfeasibleComposition(
            "segment has no net translation; required scale is unbounded"
        )
    if nv < _DEGENERATE_CHORD:
        raise InfeasibleComposition(
            "anchors require scale <= 0: the end anchor coincides with the "
            "pinned start, so the segment would collapse to a point"
        )
    scale = nv / nu
    w = _chord_rotation(u, v)
    p0 = placed.start.trans
    sim = SimilarityTransform(
        rotation=matrix_to_rot6d(w),
        translation=p0 - scale * (w @ p0),
        scale=scale,
    )
    scaled = apply_similarity(placed, sim)
    return _blend_rotations(scaled, rot6d_to_matrix(start.rot), rot6d_to_matrix(end.rot))


def compose(
    plan: Plan, atomic_trajs: Sequence[Trajectory], anchor_frames: Sequence[CameraFrame]
) -> tuple:
    """Stitch per-atomic trajectories through resolved anchors.

    Placement, left to right: a start anchor pins a segment's first pose; an
    end anchor pins its last (scaling the segment when its start is already
    pinned by the chain); unanchored segments chain onto the previous end.
    A start anchor also acts as the previous segment's end anchor so every
    junction stays continuous; adjacent anchors that pin the same junction to
    two different poses raise InfeasibleComposition. Inputs are never
    mutated. Returns (trajectory, trace).
    """
    validate_plan(plan)
    atomics = plan.atomics
    anchors = plan.anchors
    if len(atomic_trajs) != len(atomics):
        raise ValueError(
            f"expected {len(atomics)} trajectories, got {len(atomic_trajs)}"
        )
    if len(anchor_frames) != len(anchors):
        raise ValueError(f"expected {len(anchors)} anchor frames, got {len(anchor_frames)}")

    start_of: dict = {}
    end_of: dict = {}
    for step, frame in zip(anchors, anchor_frames):
        (start_of if step.role == "start" else end_of)[step.attaches_to] = frame

    trace = TraceLog()
    # a start anchor on segment i is also where segment i-1 must end; if
    # segment i-1 already has its own end anchor the two must agree, or no
    # placement can keep the junction continuous
    for i in sorted(start_of):
        if i == 0:
            continue
        here = start_of[i]
        prev = end_of.get(i - 1)
        if prev is None:
            end_of[i - 1] = here
        else:
            gap = max(
                float(np.abs(prev.trans - here.trans).max()),
                float(np.abs(prev.rot.as_array() - here.rot.as_array()).max()),
            )
            if gap > _DEGENERATE_CHORD:
                raise InfeasibleComposition(
                    f"segment {i - 1}'s end anchor and segment {i}'s start "
                    "anchor disagree; the junction cannot stay continuous"
                )

    segments = []
    rules = []
    prev_end: Optional[CameraFrame] = None
    for i, traj in enumerate(atomic_trajs):
        s = start_of.get(i, prev_end)
        e = end_of.get(i)
        if s is None and e is None:
            placed, rule = traj, "canonical"
        elif e is None:
            placed, rule = align_endpoint(traj, s, "start"), "align-start"
        elif s is None:
            placed, rule = align_endpoint(traj, e, "end"), "align-end"
        else:
            placed, rule = _align_both(traj, s, e), "align-both"
        segments.append(placed)
        rules.append(rule)
        prev_end = placed.end
        trace.add_call(
            "composer", i, {"rule": rule, "frames": len(placed)}, "placed", 0.0
        )
    out = concatenate(segments)
    trace.observation = f"{len(atomics)} segments, {len(anchors)} anchors"
    trace.reasoning = "placement rules: " + ", ".join(rules)
    return out, trace


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineModels:
    tokenizer: TokenizerNet
    model: TransformerLM


# the trajectory generator has a closed vocabulary; common free-text
# direction words are mapped onto their trained equivalents before encoding
DIRECTION_SYNONYMS = {
    "forward": "in",
    "forwards": "in",
    "ahead": "in",
    "backward": "out",
    "backwards": "out",
    "back": "out",
    "inward": "in",
    "inwards": "in",
    "outward": "out",
    "outwards": "out",
    "upward": "up",
    "upwards": "up",
    "downward": "down",
    "downwards": "down",
    "leftward": "left",
    "leftwards": "left",
    "rightward": "right",
    "rightwards": "right",
}


def canonicalize_prompt(prompt: str) -> str:
    words = prompt.split()
    return " ".join(DIRECTION_SYNONYMS.get(w.lower(), w) for w in words)


def execute_plan(
    plan: Plan,
    models: PipelineModels,
    scene: Optional[Scene] = None,
    provider=None,
    seed: int = 0,
    sampler: Optional[SamplerParams] = None,
    refine: bool = False,
    trace: Optional[TraceLog] = None,
) -> tuple:
    """Per-step tool calls for an already-built plan; returns (trajectory, trace).

    Atomic step i samples with seed base+i so steps stay independently
    reproducible; errors from any step carry a ``plan_step`` attribute.
    """
    if trace is None:
        trace = TraceLog(observation=f"plan with {len(plan.steps)} steps")
    base_sampler = sampler or SamplerParams(seed=int(seed))
    atomics = plan.atomics
    trajs = []
    for i, step in enumerate(atomics):
        prompt = canonicalize_prompt(step.prompt)
        step_sampler = SamplerParams(
            mode=base_sampler.mode,
            temperature=base_sampler.temperature,
            seed=base_sampler.seed + i,
            max_new_tokens=base_sampler.max_new_tokens,
            top_k=base_sampler.top_k,
            top_p=base_sampler.top_p,
        )
        t0 = time.perf_counter()
        try:
            gen = generate_trajectory(models.model, models.tokenizer, prompt, step_sampler)
            traj = gen.trajectory
            if step.duration_hint is not None:
                traj = tok_decode(models.tokenizer, gen.token_ids, step.duration_hint)
        except CamtrajError as err:
            err.plan_step = i
            raise
        trajs.append(traj)
        trace.add_call(
            "trajectory_generator",
            i,
            {"prompt": prompt, "seed": step_sampler.seed},
            f"{len(traj)} frames, {traj.duration_s:.2f}s",
            time.perf_counter() - t0,
        )

    frames = []
    for k, step in enumerate(plan.anchors):
        if scene is None:
            err = EmptyScene("query references scene anchors but no scene is loaded")
            err.plan_step = k
            raise err
        if provider is None:
            provider = SyntheticEmbeddingProvider(dim=scene.embedding_dim)
        t0 = time.perf_counter()
        try:
            result = select_initial_anchor(scene, provider, step.prompt)
            tool = "anchor_selector"
            if refine and getattr(provider, "differentiable", False) and scene.content:
                result = refine_anchor(scene, provider, step.prompt, init=result.camera)
                tool = "anchor_refiner"
        except CamtrajError as err:
            err.plan_step = k
            raise
        frames.append(result.camera)
        note = " (outside scene bounds)" if result.outside_bounds else ""
        trace.add_call(
            tool,
            k,
            {"prompt": step.prompt, "role": step.role},
            f"image {result.source_image_id!r} score {result.score:.3f}{note}",
            time.perf_counter() - t0,
        )

    t0 = time.perf_counter()
    out, compose_trace = compose(plan, trajs, frames)
    for call in compose_trace.calls:
        trace.calls.append(call)
    trace.timings["composer"] = time.perf_counter() - t0
    trace.reasoning += "; " + compose_trace.reasoning
    return out, trace


def run_pipeline(
    query: str,
    models: PipelineModels,
    scene: Optional[Scene] = None,
    provider=None,
    seed: int = 0,
    sampler: Optional[SamplerParams] = None,
    planner_client: Optional[Callable[[str], str]] = None,
    refine: bool = False,
) -> tuple:
    """Query -> plan -> per-step tool calls -> composed trajectory.

    Returns (trajectory, plan, trace). Deterministic given the seed and the
    grammar planner; errors from any step carry a ``plan_step`` attribute.
    """
    trace = TraceLog(observation=f"query: {query!r}")
    if planner_client is not None:
        try:
            plan = llm_plan(query, planner_client)
            trace.reasoning = "plan from remote planner"
        except RemotePlannerUnavailable:
            plan = parse_query(query)
            trace.reasoning = "remote planner unreachable; used grammar planner"
    else:
        plan = parse_query(query)
        trace.reasoning = "plan from grammar planner"
    out, trace = execute_plan(
        plan, models, scene=scene, provider=provider, seed=seed,
        sampler=sampler, refine=refine, trace=trace,
    )
    return out, plan, trace


def trajectory_digest(traj: Trajectory) -> str:
    """Content-addressed id over the canonical JSON form."""
    payload = json.dumps(trajectory_to_dict(traj), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]
