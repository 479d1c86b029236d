"""Camera pose and trajectory primitives.

Conventions:
  - A camera frame stores a camera-to-world rotation (6D continuous encoding:
    the first two columns of the rotation matrix before orthonormalization),
    the camera position in world coordinates, and one normalized focal length
    (f_pixels / image_width).
  - The canonical pose is the origin with identity rotation; the camera looks
    along -z with +y up, so +x is screen-right.
  - A trajectory is an ordered list of frames plus one global duration in
    seconds. The time step between adjacent frames is duration_s / (M - 1),
    which keeps velocities invariant under resampling.

All types are immutable values and all operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateRotation, InvalidRotation, LengthMismatch

_DEGENERATE_EPS = 1e-12
_ROTATION_CHECK_TOL = 1e-6

DEFAULT_FOCAL = 0.8


def _vec3(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    v = v.copy()
    v.flags.writeable = False
    return v


def _mat3(x) -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    return m


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Rot6D:
    """Continuous 6D rotation encoding: two 3-vectors spanning the first two
    rotation-matrix columns (orthonormalized on conversion)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _vec3(self.a))
        object.__setattr__(self, "b", _vec3(self.b))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Rot6D):
            return NotImplemented
        return np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b)

    @classmethod
    def identity(cls) -> "Rot6D":
        return cls(a=np.array([1.0, 0.0, 0.0]), b=np.array([0.0, 1.0, 0.0]))

    def as_array(self) -> np.ndarray:
        """Flat [a, b] 6-vector."""
        return np.concatenate([self.a, self.b])


@dataclass(frozen=True, eq=False)
class CameraFrame:
    """One camera pose: rotation, world position and normalized focal length."""

    rot: Rot6D
    trans: np.ndarray
    focal: float = DEFAULT_FOCAL

    def __post_init__(self):
        object.__setattr__(self, "trans", _vec3(self.trans))
        object.__setattr__(self, "focal", float(self.focal))
        if not self.focal > 0.0:
            raise ValueError(f"focal must be positive, got {self.focal}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, CameraFrame):
            return NotImplemented
        return (
            self.rot == other.rot
            and np.array_equal(self.trans, other.trans)
            and self.focal == other.focal
        )

    @classmethod
    def canonical(cls, focal: float = DEFAULT_FOCAL) -> "CameraFrame":
        return cls(rot=Rot6D.identity(), trans=np.zeros(3), focal=focal)

    def rotation_matrix(self) -> np.ndarray:
        return rot6d_to_matrix(self.rot)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered camera frames with a global duration in seconds."""

    frames: tuple
    duration_s: float

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise ValueError(f"trajectory needs at least 2 frames, got {len(frames)}")
        for f in frames:
            if not isinstance(f, CameraFrame):
                raise TypeError(f"frames must be CameraFrame, got {type(f)}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "duration_s", float(self.duration_s))
        if not self.duration_s > 0.0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.duration_s == other.duration_s
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def start(self) -> CameraFrame:
        return self.frames[0]

    @property
    def end(self) -> CameraFrame:
        return self.frames[-1]


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """Rigid transform plus uniform scale: x -> scale * (R x) + t."""

    rotation: Rot6D
    translation: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "translation", _vec3(self.translation))
        object.__setattr__(self, "scale", float(self.scale))
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimilarityTransform):
            return NotImplemented
        return (
            self.rotation == other.rotation
            and np.array_equal(self.translation, other.translation)
            and self.scale == other.scale
        )

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(rotation=Rot6D.identity(), translation=np.zeros(3), scale=1.0)

    def inverse(self) -> "SimilarityTransform":
        r = rot6d_to_matrix(self.rotation)
        inv_scale = 1.0 / self.scale
        return SimilarityTransform(
            rotation=matrix_to_rot6d(r.T),
            translation=-inv_scale * (r.T @ self.translation),
            scale=inv_scale,
        )

    def apply_point(self, p: np.ndarray) -> np.ndarray:
        r = rot6d_to_matrix(self.rotation)
        return self.scale * (r @ np.asarray(p, dtype=np.float64)) + self.translation


# ---------------------------------------------------------------------------
# Rotation conversions
# ---------------------------------------------------------------------------


def _cross3(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # same expression order as np.cross, without its axis-juggling overhead;
    # these conversions run per frame, so per-call cost matters
    return np.array(
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    )


def _norm3(v: np.ndarray) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


_EYE3 = np.eye(3)
_EYE3.flags.writeable = False
# mirror np.allclose(..., atol=tol): rtol=1e-5 relative to the identity target
_ORTHO_TOL = _ROTATION_CHECK_TOL + 1e-5 * np.eye(3)
_ORTHO_TOL.flags.writeable = False


def rot6d_to_matrix(r: Rot6D) -> np.ndarray:
    """Orthonormalize a 6D rotation into a proper rotation matrix.

    Gram-Schmidt: c1 = a/|a|; c2 = normalize(b - (b.c1) c1); c3 = c1 x c2.
    Columns of the result are (c1, c2, c3).

    Raises:
        DegenerateRotation: if |a| or the projected |b| is below 1e-12.
    """
    a, b = r.a, r.b
    na = _norm3(a)
    if na < _DEGENERATE_EPS:
        raise DegenerateRotation(f"|a| = {na:.3e} is too small")
    c1 = a / na
    b_perp = b - (b @ c1) * c1
    nb = _norm3(b_perp)
    if nb < _DEGENERATE_EPS:
        raise DegenerateRotation(f"b is parallel to a (residual {nb:.3e})")
    c2 = b_perp / nb
    out = np.empty((3, 3))
    out[:, 0] = c1
    out[:, 1] = c2
    out[:, 2] = _cross3(c1, c2)
    return out


def matrix_to_rot6d(m: np.ndarray) -> Rot6D:
    """Encode a rotation matrix as its first two columns.

    Raises:
        InvalidRotation: if m is not orthonormal with det +1 (tolerance 1e-6).
    """
    m = _mat3(m)
    if not (np.abs(m.T @ m - _EYE3) <= _ORTHO_TOL).all():
        raise InvalidRotation("matrix is not orthonormal")
    det = float(m[:, 0] @ _cross3(m[:, 1], m[:, 2]))
    if abs(det - 1.0) > _ROTATION_CHECK_TOL:
        raise InvalidRotation(f"determinant {det:.6f} != +1")
    return Rot6D(a=m[:, 0], b=m[:, 1])


def orthonormalize_rot6d(raw: np.ndarray) -> Rot6D:
    """Tolerant 6D-to-rotation cleanup for network outputs.

    Behaves like ``rot6d_to_matrix`` on well-formed input but deterministically
    substitutes fallback axes instead of raising on degenerate vectors.
    """
    raw = np.asarray(raw, dtype=np.float64).reshape(6)
    a, b = raw[:3].copy(), raw[3:].copy()
    if _norm3(a) < 1e-8:
        a = np.array([1.0, 0.0, 0.0])
    c1 = a / _norm3(a)
    b_perp = b - (b @ c1) * c1
    if _norm3(b_perp) < 1e-8:
        # pick the unit axis least aligned with c1
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(c1)))] = 1.0
        b_perp = axis - (axis @ c1) * c1
    # c1 and c2 are orthonormal by construction, so skip the matrix round trip
    return Rot6D(a=c1, b=b_perp / _norm3(b_perp))


def axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` (normalized internally) by ``angle`` rad."""
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < _DEGENERATE_EPS:
        raise ValueError("rotation axis must be non-zero")
    k = axis / n
    kx = np.array(
        [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]]
    )
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


def geodesic_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Minimal rotation angle (radians) between two rotation matrices."""
    cos = (np.trace(_mat3(r1).T @ _mat3(r2)) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion (w, x, y, z), w >= 0."""
    m = _mat3(m)
    t = np.trace(m)
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def slerp_matrix(r0: np.ndarray, r1: np.ndarray, t: float) -> np.ndarray:
    """Geodesic interpolation between two rotation matrices, t in [0, 1]."""
    q0, q1 = matrix_to_quat(r0), matrix_to_quat(r1)
    dot = float(q0 @ q1)
    if dot < 0.0:
        q1, dot = -q1, -dot
    if dot > 0.9999995:
        q = q0 + t * (q1 - q0)
    else:
        theta = math.acos(min(dot, 1.0))
        q = (math.sin((1.0 - t) * theta) * q0 + math.sin(t * theta) * q1) / math.sin(theta)
    return quat_to_matrix(q / np.linalg.norm(q))


# ---------------------------------------------------------------------------
# Trajectory operations
# ---------------------------------------------------------------------------


def frame_velocities(traj: Trajectory) -> list:
    """Per-step velocities: (linear 3-vector per second, angular rad per second).

    The time step is duration_s / (M - 1); the returned list has M - 1 entries.
    """
    m = len(traj)
    dt = traj.duration_s / (m - 1)
    out = []
    mats = [f.rotation_matrix() for f in traj.frames]
    for i in range(m - 1):
        linear = (traj.frames[i + 1].trans - traj.frames[i].trans) / dt
        angular = geodesic_angle(mats[i], mats[i + 1]) / dt
        out.append((linear, angular))
    return out


def apply_similarity(traj: Trajectory, s: SimilarityTransform) -> Trajectory:
    """Transform every frame: trans' = scale (R_s trans) + t_s, rot' = R_s rot.

    Focal lengths and the duration are unchanged.
    """
    rs = rot6d_to_matrix(s.rotation)
    frames = []
    for f in traj.frames:
        r_new = rs @ f.rotation_matrix()
        frames.append(
            CameraFrame(
                rot=matrix_to_rot6d(r_new),
                trans=s.scale * (rs @ f.trans) + s.translation,
                focal=f.focal,
            )
        )
    return Trajectory(frames=tuple(frames), duration_s=traj.duration_s)


def endpoint_alignment(source: CameraFrame, target: CameraFrame) -> SimilarityTransform:
    """Rigid transform (scale 1) mapping the source pose exactly onto target."""
    r_src = source.rotation_matrix()
    r_tgt = target.rotation_matrix()
    rs = r_tgt @ r_src.T
    ts = target.trans - rs @ source.trans
    return SimilarityTransform(rotation=matrix_to_rot6d(rs), translation=ts, scale=1.0)


def align_endpoint(traj: Trajectory, target: CameraFrame, which: str) -> Trajectory:
    """Rigidly move the trajectory so its start or end pose equals ``target``.

    ``which`` is "start" or "end". The chosen endpoint's rotation and
    translation match the target to 1e-9; the path shape is preserved.
    """
    if which not in ("start", "end"):
        raise ValueError(f"which must be 'start' or 'end', got {which!r}")
    endpoint = traj.start if which == "start" else traj.end
    return apply_similarity(traj, endpoint_alignment(endpoint, target))


def resample(traj: Trajectory, m_new: int) -> Trajectory:
    """Resample to ``m_new`` frames: lerp translation/focal, slerp rotation.

    Endpoints are preserved exactly and the duration is unchanged.
    """
    if m_new < 2:
        raise ValueError(f"resample target must be >= 2 frames, got {m_new}")
    m = len(traj)
    if m_new == m:
        return traj
    mats = [f.rotation_matrix() for f in traj.frames]
    frames = []
    for j in range(m_new):
        u = j / (m_new - 1)
        if j == 0:
            frames.append(traj.frames[0])
            continue
        if j == m_new - 1:
            frames.append(traj.frames[-1])
            continue
        pos = u * (m - 1)
        i0 = int(math.floor(pos))
        i1 = min(i0 + 1, m - 1)
        t = pos - i0
        trans = (1.0 - t) * traj.frames[i0].trans + t * traj.frames[i1].trans
        focal = (1.0 - t) * traj.frames[i0].focal + t * traj.frames[i1].focal
        rot = matrix_to_rot6d(slerp_matrix(mats[i0], mats[i1], t))
        frames.append(CameraFrame(rot=rot, trans=trans, focal=focal))
    return Trajectory(frames=tuple(frames), duration_s=traj.duration_s)


def trajectory_mse(a: Trajectory, b: Trajectory) -> tuple:
    """(translation MSE in scene-units^2, rotation MSE in degrees^2).

    Raises:
        LengthMismatch: if frame counts differ (resample first).
    """
    if len(a) != len(b):
        raise LengthMismatch(f"frame counts differ: {len(a)} vs {len(b)}")
    t_err = 0.0
    r_err = 0.0
    for fa, fb in zip(a.frames, b.frames):
        t_err += float(np.sum((fa.trans - fb.trans) ** 2))
        ang = math.degrees(geodesic_angle(fa.rotation_matrix(), fb.rotation_matrix()))
        r_err += ang * ang
    m = len(a)
    return t_err / m, r_err / m


def concatenate(trajs: Sequence[Trajectory]) -> Trajectory:
    """Chain already-aligned trajectories, deduplicating shared junction frames.

    Durations sum. Callers are responsible for junction continuity.
    """
    if not trajs:
        raise ValueError("need at least one trajectory")
    frames = list(trajs[0].frames)
    total = trajs[0].duration_s
    for t in trajs[1:]:
        frames.extend(t.frames[1:])
        total += t.duration_s
    return Trajectory(frames=tuple(frames), duration_s=total)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def frame_to_dict(f: CameraFrame) -> dict:
    return {
        "rot6d": [float(x) for x in f.rot.as_array()],
        "trans": [float(x) for x in f.trans],
        "focal": float(f.focal),
    }


def frame_from_dict(d: dict) -> CameraFrame:
    r = d["rot6d"]
    return CameraFrame(
        rot=Rot6D(a=np.array(r[:3], dtype=np.float64), b=np.array(r[3:], dtype=np.float64)),
        trans=np.array(d["trans"], dtype=np.float64),
        focal=float(d["focal"]),
    )


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "duration_s": float(traj.duration_s),
        "frames": [frame_to_dict(f) for f in traj.frames],
    }


def trajectory_from_dict(d: dict) -> Trajectory:
    return Trajectory(
        frames=tuple(frame_from_dict(f) for f in d["frames"]),
        duration_s=float(d["duration_s"]),
    )


def camera_path_dict(traj: Trajectory) -> dict:
    """Export for external radiance-field renderers: c2w matrices plus FOV.

    fps follows the velocity convention: (M - 1) / duration_s, so frame i sits
    at time i * duration_s / (M - 1).
    """
    frames = []
    for f in traj.frames:
        c2w = np.eye(4)
        c2w[:3, :3] = f.rotation_matrix()
        c2w[:3, 3] = f.trans
        fov_deg = 2.0 * math.atan(0.5 / f.focal) * 180.0 / math.pi
        frames.append(
            {"c2w": [float(x) for x in c2w.reshape(-1)], "fov_deg": float(fov_deg)}
        )
    return {"fps": float((len(traj) - 1) / traj.duration_s), "frames": frames}
