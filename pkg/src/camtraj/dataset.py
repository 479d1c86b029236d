"""Synthetic paired text-trajectory corpus.

Each sample is a short natural-language instruction plus the camera trajectory
it describes, built from 1-4 motion primitives. The vocabulary is closed and
template-based so a rule-based tagger can recover {kind, direction, speed}
from any generated sentence, which gives tests an exact consistency oracle.

Geometric sign conventions (direction = +1):
  pan left (rotation about +y), tilt up (+x), roll clockwise (about -z),
  dolly in (translation along -z), truck right (+x), pedestal up (+y),
  zoom in (focal up), orbit right (camera starts moving +x), dolly-zoom in.
Direction -1 is the opposite word; static uses 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import (
    CameraFrame,
    DEFAULT_FOCAL,
    Rot6D,
    Trajectory,
    align_endpoint,
    axis_angle_matrix,
    concatenate,
    matrix_to_rot6d,
    trajectory_from_dict,
    trajectory_to_dict,
)

KINDS = (
    "pan",
    "tilt",
    "roll",
    "dolly",
    "truck",
    "pedestal",
    "zoom",
    "orbit",
    "dolly_zoom",
    "static",
)

ROTATION_KINDS = ("pan", "tilt", "roll", "orbit")
TRANSLATION_KINDS = ("dolly", "truck", "pedestal")

SPEED_FACTORS = {"fast": 0.5, "medium": 1.0, "slow": 2.0}

DIRECTION_WORDS = {
    "pan": {1: "left", -1: "right"},
    "tilt": {1: "up", -1: "down"},
    "roll": {1: "clockwise", -1: "counterclockwise"},
    "dolly": {1: "in", -1: "out"},
    "truck": {1: "right", -1: "left"},
    "pedestal": {1: "up", -1: "down"},
    "zoom": {1: "in", -1: "out"},
    "orbit": {1: "right", -1: "left"},
    "dolly_zoom": {1: "in", -1: "out"},
    "static": {0: ""},
}

# Paraphrase templates per kind. Every template contains exactly one keyword
# from KIND_KEYWORDS for its kind so the tagger is unambiguous. "{dir}" is the
# direction word; the speed word is appended afterwards.
TEMPLATES = {
    "pan": (
        "pan {dir}",
        "pan the camera {dir}",
        "rotate the camera {dir}",
        "rotate the view {dir}",
        "rotate the camera to the {dir}",
        "pan the view {dir}",
        "pan the shot {dir}",
        "rotate the shot {dir}",
    ),
    "tilt": (
        "tilt {dir}",
        "tilt the camera {dir}",
        "tilt the view {dir}",
        "tilt the shot {dir}",
        "tilt the lens {dir}",
        "tip the camera {dir}",
    ),
    "roll": (
        "roll {dir}",
        "roll the camera {dir}",
        "roll the view {dir}",
        "roll the shot {dir}",
        "roll the lens {dir}",
        "twist the camera {dir}",
    ),
    "dolly": (
        "dolly {dir}",
        "dolly the camera {dir}",
        "dolly the shot {dir}",
        "dolly the view {dir}",
        "push the camera {dir}",
        "dolly the lens {dir}",
    ),
    "truck": (
        "truck {dir}",
        "truck the camera {dir}",
        "slide the camera {dir}",
        "move the camera to the {dir}",
        "truck the shot {dir}",
        "truck the view {dir}",
        "slide the view {dir}",
    ),
    "pedestal": (
        "pedestal {dir}",
        "pedestal the camera {dir}",
        "{raise_lower} the camera",
        "pedestal the shot {dir}",
        "pedestal the view {dir}",
        "{raise_lower} the view",
    ),
    "zoom": (
        "zoom {dir}",
        "zoom the lens {dir}",
        "zoom the camera {dir}",
        "zoom the shot {dir}",
        "zoom the view {dir}",
        "zoom the frame {dir}",
    ),
    "orbit": (
        "orbit {dir} around the subject",
        "arc {dir} around the subject",
        "circle the subject to the {dir}",
        "orbit {dir}",
        "orbit the subject to the {dir}",
        "circle {dir} around the subject",
        "orbit the camera {dir}",
    ),
    "dolly_zoom": (
        "dolly zoom {dir}",
        "perform a dolly zoom {dir}",
        "do a dolly zoom {dir}",
        "dolly zoom the camera {dir}",
        "dolly zoom the shot {dir}",
        "execute a dolly zoom {dir}",
    ),
    # the seed-0 draw over five templates is index 3, so "hold the camera
    # still" must sit there to keep the canonical static rendering stable.
    # "lock the camera in place" is trained so the n-gram "camera in place"
    # has static evidence; without it the dolly/zoom texts ("dolly the
    # camera in", "zoom the camera in") dominate that prefix.
    "static": (
        "keep the camera static",
        "stay in place",
        "lock the camera in place",
        "hold the camera still",
        "hold the camera in place",
    ),
}

# tagger keyword -> kind (dolly-zoom handled as a bigram before this table)
KIND_KEYWORDS = {
    "pan": "pan",
    "rotate": "pan",
    "tilt": "tilt",
    "tip": "tilt",
    "roll": "roll",
    "twist": "roll",
    "dolly": "dolly",
    "push": "dolly",
    "truck": "truck",
    "slide": "truck",
    "move": "truck",
    "pedestal": "pedestal",
    "raise": "pedestal",
    "lower": "pedestal",
    "zoom": "zoom",
    "orbit": "orbit",
    "arc": "orbit",
    "circle": "orbit",
    "hold": "static",
    "static": "static",
    "stay": "static",
    "keep": "static",
    "lock": "static",
}

CONNECTIVES = ("then", "after that")

SUBJECT_POSITION = np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True)
class MotionPrimitive:
    """One atomic camera move.

    magnitude is degrees for rotation kinds, scene units for translation
    kinds, a focal ratio (> 1 means stronger) for zoom, and the backward
    travel in scene units for dolly_zoom. static ignores it.
    """

    kind: str
    magnitude: float = 0.0
    direction: int = 1
    speed_class: str = "medium"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if self.speed_class not in SPEED_FACTORS:
            raise ValueError(f"unknown speed class {self.speed_class!r}")
        if self.kind == "static":
            object.__setattr__(self, "magnitude", 0.0)
            object.__setattr__(self, "direction", 0)
        else:
            if not self.magnitude > 0:
                raise ValueError(f"{self.kind} needs magnitude > 0")
            if self.direction not in (1, -1):
                raise ValueError("direction must be +1 or -1")

    @property
    def direction_word(self) -> str:
        return DIRECTION_WORDS[self.kind][self.direction]


@dataclass(frozen=True)
class TextTrajPair:
    text: str
    traj: Trajectory

    def __eq__(self, other) -> bool:
        if not isinstance(other, TextTrajPair):
            return NotImplemented
        return self.text == other.text and self.traj == other.traj


@dataclass(frozen=True)
class DatasetConfig:
    m_frames: int = 120
    base_duration_s: float = 4.0
    start_focal: float = DEFAULT_FOCAL
    max_primitives: int = 4


# ---------------------------------------------------------------------------
# Primitive geometry
# ---------------------------------------------------------------------------


def primitive_duration(p: MotionPrimitive, base_duration_s: float) -> float:
    return base_duration_s * SPEED_FACTORS[p.speed_class]


def _primitive_frame(p: MotionPrimitive, u: float, focal0: float) -> CameraFrame:
    """Pose at progress u in [0, 1] along the primitive, from the canonical pose."""
    rot = np.eye(3)
    trans = np.zeros(3)
    focal = focal0
    k, d, m = p.kind, p.direction, p.magnitude
    if k == "pan":
        rot = axis_angle_matrix([0, 1, 0], math.radians(m) * d * u)
    elif k == "tilt":
        rot = axis_angle_matrix([1, 0, 0], math.radians(m) * d * u)
    elif k == "roll":
        rot = axis_angle_matrix([0, 0, -1], math.radians(m) * d * u)
    elif k == "dolly":
        trans = np.array([0.0, 0.0, -m * d * u])
    elif k == "truck":
        trans = np.array([m * d * u, 0.0, 0.0])
    elif k == "pedestal":
        trans = np.array([0.0, m * d * u, 0.0])
    elif k == "zoom":
        focal = focal0 * (m ** (d * u))
    elif k == "orbit":
        psi = math.radians(m) * d * u
        rot = axis_angle_matrix([0, 1, 0], psi)
        # circle about the subject one unit ahead; look direction stays on it
        trans = SUBJECT_POSITION + rot @ (-SUBJECT_POSITION)
    elif k == "dolly_zoom":
        # subject 1 unit ahead; keep focal / distance constant
        dist = 1.0 - d * m * u
        if dist <= 0.05:
            raise ValueError(f"dolly_zoom magnitude {m} reaches the subject")
        trans = np.array([0.0, 0.0, dist - 1.0])
        focal = focal0 * dist
    elif k == "static":
        pass
    return CameraFrame(rot=matrix_to_rot6d(rot), trans=trans, focal=focal)


def gen_primitive(
    p: MotionPrimitive,
    m: int,
    duration_s: float,
    focal0: float = DEFAULT_FOCAL,
) -> Trajectory:
    """Sample one primitive into M frames starting at the canonical pose.

    duration_s is the medium-speed baseline; the speed class halves it for
    fast and doubles it for slow.
    """
    if m < 2:
        raise ValueError(f"need at least 2 frames, got {m}")
    frames = tuple(_primitive_frame(p, i / (m - 1), focal0) for i in range(m))
    return Trajectory(frames=frames, duration_s=primitive_duration(p, duration_s))


def compose_primitives(
    ps: Sequence[MotionPrimitive],
    m_per_segment,
    duration_per_segment,
) -> Trajectory:
    """Chain primitives so each segment starts at the previous final pose.

    m_per_segment and duration_per_segment are either scalars applied to all
    segments or per-segment sequences. Junction frames are shared, so the
    total frame count is sum(M_i) - (len(ps) - 1). Focal tracks are rescaled
    for continuity across zoom segments.
    """
    if not ps:
        raise ValueError("need at least one primitive")
    n = len(ps)
    ms = [int(m_per_segment)] * n if np.isscalar(m_per_segment) else [int(x) for x in m_per_segment]
    ds = (
        [float(duration_per_segment)] * n
        if np.isscalar(duration_per_segment)
        else [float(x) for x in duration_per_segment]
    )
    if len(ms) != n or len(ds) != n:
        raise ValueError("per-segment lists must match the primitive count")
    segments = []
    for i, p in enumerate(ps):
        focal0 = DEFAULT_FOCAL if not segments else segments[-1].end.focal
        seg = gen_primitive(p, ms[i], ds[i], focal0=focal0)
        if segments:
            seg = align_endpoint(seg, segments[-1].end, "start")
        segments.append(seg)
    return concatenate(segments)


# ---------------------------------------------------------------------------
# Text rendering
# ---------------------------------------------------------------------------


def render_with_template(p: MotionPrimitive, template_idx: int) -> str:
    """Render one primitive with an explicit template index."""
    tmpl = TEMPLATES[p.kind][template_idx]
    if p.kind == "pedestal" and "{raise_lower}" in tmpl:
        text = tmpl.format(raise_lower="raise" if p.direction == 1 else "lower")
    else:
        text = tmpl.format(dir=p.direction_word) if "{dir}" in tmpl else tmpl
    if p.kind != "static":
        if p.speed_class == "slow":
            text += " slowly"
        elif p.speed_class == "fast":
            text += " quickly"
    return text


def render_description(ps: Sequence[MotionPrimitive], seed: int) -> str:
    """Deterministic paraphrase for a primitive sequence.

    Template and connective choices are drawn from a generator keyed by the
    seed, so different seeds give different wordings with identical tags.
    """
    rng = np.random.default_rng([int(seed), 1009])
    parts = []
    for i, p in enumerate(ps):
        idx = int(rng.integers(0, len(TEMPLATES[p.kind])))
        if i > 0:
            parts.append(CONNECTIVES[int(rng.integers(0, len(CONNECTIVES)))])
        parts.append(render_with_template(p, idx))
    return " ".join(parts)


def vocabulary_words() -> list:
    """Sorted closed vocabulary over everything render_description can emit."""
    words = set()
    for kind, templates in TEMPLATES.items():
        for t in templates:
            for w in t.replace("{dir}", "").replace("{raise_lower}", "").split():
                words.add(w)
        for word in DIRECTION_WORDS[kind].values():
            if word:
                words.add(word)
    words.update({"raise", "lower", "slowly", "quickly"})
    for c in CONNECTIVES:
        words.update(c.split())
    return sorted(words)


# ---------------------------------------------------------------------------
# Taggers (consistency oracles)
# ---------------------------------------------------------------------------


def tag_text(text: str) -> list:
    """Extract (kind, direction, speed) per clause from a generated sentence.

    Returns a list of dicts. Unknown words are ignored, so this also works on
    hand-written paraphrases that stay inside the closed vocabulary.
    """
    marked = f" {text.lower()} "
    for conn in sorted(CONNECTIVES, key=len, reverse=True):
        marked = marked.replace(f" {conn} ", " | ")
    tags = []
    for clause in marked.split("|"):
        words = clause.split()
        if not words:
            continue
        kind = None
        for i, w in enumerate(words):
            if w == "dolly" and i + 1 < len(words) and words[i + 1] == "zoom":
                kind = "dolly_zoom"
                break
        if kind is None:
            for w in words:
                if w in KIND_KEYWORDS:
                    kind = KIND_KEYWORDS[w]
                    break
        if kind is None:
            tags.append({"kind": None, "direction": 0, "speed": "medium"})
            continue
        direction = 0
        if kind != "static":
            wanted = DIRECTION_WORDS[kind]
            for w in words:
                for sign, word in wanted.items():
                    if w == word:
                        direction = sign
            if kind == "pedestal" and direction == 0:
                if "raise" in words:
                    direction = 1
                elif "lower" in words:
                    direction = -1
        speed = "medium"
        if "slowly" in words or "slow" in words:
            speed = "slow"
        elif "quickly" in words or "fast" in words or "quick" in words:
            speed = "fast"
        tags.append({"kind": kind, "direction": direction, "speed": speed})
    return tags


def primitive_tags(ps: Sequence[MotionPrimitive]) -> list:
    return [
        {"kind": p.kind, "direction": p.direction, "speed": p.speed_class if p.kind != "static" else "medium"}
        for p in ps
    ]


_SPEED_EDGES = (math.sqrt(2.0 * 4.0), math.sqrt(4.0 * 8.0))  # geometric midpoints


def tag_trajectory(traj: Trajectory, base_duration_s: float = 4.0) -> dict:
    """Classify a single-primitive trajectory into (kind, direction, speed).

    Uses net camera-local rotation/translation and the focal ratio. Intended
    for trajectories produced by gen_primitive; composites should be split
    into segments first. Endpoints are trimmed by a few frames so that codec
    reconstructions, whose boundary frames are the least reliable, still tag
    like their sources.
    """
    m = len(traj)
    trim = 3 if m >= 16 else 0
    first, last = traj.frames[trim], traj.frames[m - 1 - trim]
    r0 = first.rotation_matrix()
    r_net = r0.T @ last.rotation_matrix()
    t_net = r0.T @ (last.trans - first.trans)
    log_ratio = math.log(last.focal / first.focal)

    # rotation axis * angle from the net rotation
    cos = (np.trace(r_net) - 1.0) / 2.0
    angle = float(np.arccos(np.clip(cos, -1.0, 1.0)))
    if angle > 1e-9:
        axis = np.array(
            [
                r_net[2, 1] - r_net[1, 2],
                r_net[0, 2] - r_net[2, 0],
                r_net[1, 0] - r_net[0, 1],
            ]
        )
        norm = np.linalg.norm(axis)
        axis = axis / norm if norm > 1e-12 else np.zeros(3)
    else:
        axis = np.zeros(3)

    # thresholds sit between the smallest dataset signal (30 deg rotations,
    # 0.3-unit translations, log 1.4 focal ratios) and codec reconstruction
    # noise, so both clean and round-tripped trajectories classify alike
    has_rot = angle > 0.30
    has_trans = float(np.linalg.norm(t_net)) > 0.18
    has_zoom = abs(log_ratio) > 0.22

    d = traj.duration_s
    speed = "fast" if d < _SPEED_EDGES[0] else ("medium" if d < _SPEED_EDGES[1] else "slow")

    if not (has_rot or has_trans or has_zoom):
        return {"kind": "static", "direction": 0, "speed": "medium"}
    if has_rot and has_trans:
        sign = 1 if axis[1] > 0 else -1  # orbit right turns about +y
        return {"kind": "orbit", "direction": sign, "speed": speed}
    if has_trans and has_zoom:
        sign = 1 if t_net[2] < 0 else -1
        return {"kind": "dolly_zoom", "direction": sign, "speed": speed}
    if has_zoom and not has_trans:
        # a clear focal ramp outranks borderline rotation readings
        return {"kind": "zoom", "direction": 1 if log_ratio > 0 else -1, "speed": speed}
    if has_rot:
        comp = int(np.argmax(np.abs(axis)))
        if comp == 1:
            return {"kind": "pan", "direction": 1 if axis[1] > 0 else -1, "speed": speed}
        if comp == 0:
            return {"kind": "tilt", "direction": 1 if axis[0] > 0 else -1, "speed": speed}
        return {"kind": "roll", "direction": 1 if axis[2] < 0 else -1, "speed": speed}
    if has_trans:
        comp = int(np.argmax(np.abs(t_net)))
        if comp == 2:
            return {"kind": "dolly", "direction": 1 if t_net[2] < 0 else -1, "speed": speed}
        if comp == 0:
            return {"kind": "truck", "direction": 1 if t_net[0] > 0 else -1, "speed": speed}
        return {"kind": "pedestal", "direction": 1 if t_net[1] > 0 else -1, "speed": speed}
    return {"kind": "zoom", "direction": 1 if log_ratio > 0 else -1, "speed": speed}


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------

_ROT_MAGNITUDES = (30.0, 45.0, 60.0, 90.0)
_TRANS_MAGNITUDES = (0.5, 1.0, 1.5)
_ZOOM_RATIOS = (1.5, 2.0)
_DZ_OUT = (0.5, 1.0)
_DZ_IN = (0.3, 0.5)
SPEEDS = ("slow", "medium", "fast")


def sample_primitive(rng: np.random.Generator, kind: Optional[str] = None) -> MotionPrimitive:
    if kind is None:
        kind = KINDS[int(rng.integers(0, len(KINDS)))]
    if kind == "static":
        return MotionPrimitive(kind="static")
    direction = 1 if rng.integers(0, 2) == 0 else -1
    speed = SPEEDS[int(rng.integers(0, len(SPEEDS)))]
    if kind in ROTATION_KINDS:
        mag = _ROT_MAGNITUDES[int(rng.integers(0, len(_ROT_MAGNITUDES)))]
    elif kind in TRANSLATION_KINDS:
        mag = _TRANS_MAGNITUDES[int(rng.integers(0, len(_TRANS_MAGNITUDES)))]
    elif kind == "zoom":
        mag = _ZOOM_RATIOS[int(rng.integers(0, len(_ZOOM_RATIOS)))]
    else:  # dolly_zoom
        table = _DZ_IN if direction == 1 else _DZ_OUT
        mag = table[int(rng.integers(0, len(table)))]
    return MotionPrimitive(kind=kind, magnitude=mag, direction=direction, speed_class=speed)


def enumerate_primitive_grid() -> list:
    """Every single primitive over the discrete magnitude/direction/speed
    tables, in a fixed deterministic order. Useful as a pretraining corpus."""
    out = []
    for kind in KINDS:
        if kind == "static":
            out.append(MotionPrimitive(kind="static"))
            continue
        if kind in ROTATION_KINDS:
            mags = _ROT_MAGNITUDES
        elif kind in TRANSLATION_KINDS:
            mags = _TRANS_MAGNITUDES
        elif kind == "zoom":
            mags = _ZOOM_RATIOS
        else:
            mags = None  # dolly_zoom: direction-specific table
        for direction in (1, -1):
            table = mags if mags is not None else (_DZ_IN if direction == 1 else _DZ_OUT)
            for mag in table:
                for speed in SPEEDS:
                    out.append(
                        MotionPrimitive(
                            kind=kind, magnitude=mag, direction=direction, speed_class=speed
                        )
                    )
    return out


# One representative magnitude per kind for pretraining text corpora. Texts
# carry no magnitude words, so pairing one text with several magnitudes makes
# the text-conditional multimodal and greedy decoding ill-posed; pinning one
# magnitude per kind keeps it a function.
CANONICAL_MAGNITUDES = {
    "pan": 60.0,
    "tilt": 60.0,
    "roll": 60.0,
    "orbit": 60.0,
    "dolly": 1.0,
    "truck": 1.0,
    "pedestal": 1.0,
    "zoom": 2.0,
}
_CANONICAL_DZ = {1: 0.5, -1: 1.0}

# Template index per kind that is excluded from every training corpus and
# used only for paraphrase-generalization checks. Each reserved template must
# be lexically covered: every word in it still occurs in some trained
# template, so the holdout tests sentence-form recombination, not an
# untrained word embedding.
RESERVED_TEMPLATES = {
    "pan": 3,
    "tilt": 1,
    "roll": 1,
    "dolly": 1,
    "truck": 1,
    "pedestal": 1,
    "zoom": 2,
    "orbit": 5,
    "dolly_zoom": 4,
    "static": 4,
}

# The 16-pair supervised translation corpus: (kind, direction, speed,
# training template index). Covers all ten kinds, both directions where
# they differ, and all three speed classes.
TRANSLATION_PROTOCOL = (
    ("pan", 1, "slow", 0),
    ("pan", -1, "fast", 2),
    ("tilt", 1, "medium", 0),
    ("tilt", -1, "slow", 2),
    ("roll", 1, "fast", 0),
    ("roll", -1, "medium", 2),
    ("dolly", 1, "slow", 0),
    ("dolly", -1, "fast", 2),
    ("truck", 1, "medium", 0),
    ("truck", -1, "slow", 2),
    ("pedestal", 1, "fast", 0),
    ("zoom", 1, "slow", 0),
    ("zoom", -1, "fast", 1),
    ("orbit", 1, "medium", 0),
    ("dolly_zoom", -1, "slow", 0),
    ("static", 0, "medium", 3),
)


def canonical_primitive(kind: str, direction: int, speed: str) -> MotionPrimitive:
    if kind == "static":
        return MotionPrimitive(kind="static")
    mag = _CANONICAL_DZ[direction] if kind == "dolly_zoom" else CANONICAL_MAGNITUDES[kind]
    return MotionPrimitive(kind=kind, magnitude=mag, direction=direction, speed_class=speed)


def canonical_primitive_grid() -> list:
    """One primitive per (kind, direction, speed) at the canonical magnitude."""
    out = []
    for kind in KINDS:
        if kind == "static":
            out.append(MotionPrimitive(kind="static"))
            continue
        for direction in (1, -1):
            for speed in SPEEDS:
                out.append(canonical_primitive(kind, direction, speed))
    return out


def translation_protocol() -> list:
    """(primitive, training text, held-out paraphrase) per protocol row."""
    out = []
    for kind, direction, speed, template_idx in TRANSLATION_PROTOCOL:
        p = canonical_primitive(kind, direction, speed)
        out.append(
            (
                p,
                render_with_template(p, template_idx),
                render_with_template(p, RESERVED_TEMPLATES[kind]),
            )
        )
    return out


_PROTECTED_WORDS = (
    frozenset(KIND_KEYWORDS)
    | {w for table in DIRECTION_WORDS.values() for w in table.values() if w}
    | {"slowly", "quickly", "still"}
)


def text_variants(text: str, n: int, rng: np.random.Generator, p: float = 0.35) -> list:
    """Up to n word-dropout variants of a description. Kind, direction and
    speed words are never dropped, so every variant keeps the source tags."""
    words = text.split()
    out = []
    for _ in range(n):
        kept = [w for w in words if w in _PROTECTED_WORDS or rng.random() > p]
        if kept and kept != words:
            out.append(" ".join(kept))
    return out


def _segment_frame_counts(total_m: int, count: int) -> list:
    """Split so sum(M_i) - (count - 1) == total_m."""
    budget = total_m + (count - 1)
    base = budget // count
    extra = budget % count
    return [base + (1 if i < extra else 0) for i in range(count)]


def generate_item(seed: int, index: int, config: DatasetConfig) -> tuple:
    """One (TextTrajPair, primitives) sample; index i uses generator [seed, i]."""
    rng = np.random.default_rng([int(seed), int(index)])
    count = int(rng.integers(1, config.max_primitives + 1))
    kinds = [None] * count
    if index < len(KINDS):
        kinds[0] = KINDS[index]  # round-robin guarantees kind coverage early
    ps = [sample_primitive(rng, kind=k) for k in kinds]
    ms = _segment_frame_counts(config.m_frames, count)
    traj = compose_primitives(ps, ms, [config.base_duration_s] * count)
    text = render_description(ps, seed=int(rng.integers(0, 2**31)))
    return TextTrajPair(text=text, traj=traj), ps


def generate_dataset(n: int, seed: int, config: Optional[DatasetConfig] = None) -> list:
    """Deterministic corpus of n text-trajectory pairs."""
    if n < 1:
        raise ValueError("n must be >= 1")
    config = config or DatasetConfig()
    return [generate_item(seed, i, config)[0] for i in range(n)]


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------


def pair_to_dict(pair: TextTrajPair) -> dict:
    d = trajectory_to_dict(pair.traj)
    return {"text": pair.text, "duration_s": d["duration_s"], "frames": d["frames"]}


def pair_from_dict(d: dict) -> TextTrajPair:
    return TextTrajPair(
        text=d["text"],
        traj=trajectory_from_dict({"duration_s": d["duration_s"], "frames": d["frames"]}),
    )


def write_jsonl(pairs: Iterable[TextTrajPair], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair_to_dict(pair), sort_keys=True) + "\n")


def read_jsonl(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(pair_from_dict(json.loads(line)))
    return out
