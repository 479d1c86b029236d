"""Scene grounding: pick the posed image best matching a prompt, then refine
its camera by gradient descent on embedding similarity.

A Scene bundles posed images with precomputed unit embeddings plus a tiny
renderable content model (colored Gaussian blobs). Selection is a cosine
argmax over image embeddings; refinement differentiates through a toy
splatting renderer and an embedding provider.
"""

import hashlib
import json
import math
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from .errors import EmptyScene, NotDifferentiable
from .geometry import CameraFrame, Rot6D, frame_from_dict, frame_to_dict, orthonormalize_rot6d

__all__ = [
    "AnchorResult",
    "Blob",
    "FileEmbeddingProvider",
    "RemoteEmbeddingProvider",
    "Scene",
    "SceneImage",
    "SyntheticEmbeddingProvider",
    "grounding_score",
    "load_scene",
    "refine_anchor",
    "scene_from_dict",
    "scene_to_dict",
    "select_initial_anchor",
    "toy_render",
]


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Blob:
    """One colored Gaussian blob of renderable scene content."""

    center: np.ndarray
    radius: float
    color: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64).reshape(3))
        if not self.radius > 0:
            raise ValueError(f"blob radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class SceneImage:
    image_id: str
    camera: CameraFrame
    embedding: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "embedding", np.asarray(self.embedding, dtype=np.float64).reshape(-1)
        )


@dataclass(frozen=True)
class Scene:
    scene_id: str
    embedding_dim: int
    images: tuple
    content: tuple = ()
    bounds: tuple = (
        np.array([-10.0, -10.0, -10.0]),
        np.array([10.0, 10.0, 10.0]),
    )

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "content", tuple(self.content))
        lo, hi = self.bounds
        object.__setattr__(
            self,
            "bounds",
            (
                np.asarray(lo, dtype=np.float64).reshape(3),
                np.asarray(hi, dtype=np.float64).reshape(3),
            ),
        )

    def contains(self, point: np.ndarray) -> bool:
        lo, hi = self.bounds
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= lo) and np.all(p <= hi))


@dataclass(frozen=True)
class AnchorResult:
    camera: CameraFrame
    score: float
    source_image_id: str = ""
    refinement_steps: int = 0
    outside_bounds: bool = False


# ---------------------------------------------------------------------------
# Scene manifests
# ---------------------------------------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def scene_from_dict(data: dict, scene_id: str = "", base_dir: Optional[Path] = None) -> Scene:
    """Build a Scene from the manifest layout; validates schema and norms."""
    if not isinstance(data, dict):
        raise ValueError("scene manifest must be a JSON object")
    try:
        dim = int(data["embedding_dim"])
        raw_images = data["images"]
    except KeyError as missing:
        raise ValueError(f"scene manifest missing key {missing}") from None
    if dim <= 0:
        raise ValueError(f"embedding_dim must be positive, got {dim}")
    if not isinstance(raw_images, list) or not raw_images:
        raise ValueError("scene manifest needs a non-empty images list")

    images = []
    for i, entry in enumerate(raw_images):
        try:
            image_id = str(entry["id"])
            camera = frame_from_dict(entry["camera"])
        except (KeyError, TypeError) as bad:
            raise ValueError(f"image {i}: invalid camera or id ({bad})") from None
        if "embedding" in entry:
            vec = np.asarray(entry["embedding"], dtype=np.float64)
        elif "embedding_file" in entry:
            path = Path(entry["embedding_file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            vec = np.asarray(json.loads(path.read_text()), dtype=np.float64)
        else:
            raise ValueError(f"image {image_id}: needs embedding or embedding_file")
        if vec.shape != (dim,):
            raise ValueError(
                f"image {image_id}: embedding has shape {vec.shape}, expected ({dim},)"
            )
        if abs(float(np.linalg.norm(vec)) - 1.0) >= 1e-6:
            raise ValueError(f"image {image_id}: embedding is not unit-norm")
        images.append(SceneImage(image_id=image_id, camera=camera, embedding=vec))

    content = tuple(
        Blob(center=b["center"], radius=b["radius"], color=b["color"])
        for b in data.get("content", [])
    )
    bounds_raw = data.get("bounds", {"lo": [-10, -10, -10], "hi": [10, 10, 10]})
    lo = np.asarray(bounds_raw["lo"], dtype=np.float64)
    hi = np.asarray(bounds_raw["hi"], dtype=np.float64)
    if lo.shape != (3,) or hi.shape != (3,) or not np.all(lo < hi):
        raise ValueError("scene bounds must satisfy lo < hi componentwise")
    return Scene(
        scene_id=scene_id or str(data.get("scene_id", "")),
        embedding_dim=dim,
        images=tuple(images),
        content=content,
        bounds=(lo, hi),
    )


def scene_to_dict(scene: Scene) -> dict:
    lo, hi = scene.bounds
    return {
        "scene_id": scene.scene_id,
        "embedding_dim": scene.embedding_dim,
        "images": [
            {
                "id": img.image_id,
                "camera": frame_to_dict(img.camera),
                "embedding": [float(x) for x in img.embedding],
            }
            for img in scene.images
        ],
        "content": [
            {
                "center": [float(x) for x in b.center],
                "radius": float(b.radius),
                "color": [float(x) for x in b.color],
            }
            for b in scene.content
        ],
        "bounds": {"lo": [float(x) for x in lo], "hi": [float(x) for x in hi]},
    }


def load_scene(path) -> Scene:
    path = Path(path)
    data = json.loads(path.read_text())
    return scene_from_dict(data, scene_id=str(data.get("scene_id", path.stem)), base_dir=path.parent)


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------


def _hash_unit_vector(text: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}:{text}".encode()).digest()
    rng = np.random.default_rng(np.frombuffer(digest, dtype=np.uint64))
    return _unit(rng.standard_normal(dim))


class SyntheticEmbeddingProvider:
    """Deterministic stand-in for a vision-language encoder.

    Text embeds via a hash-seeded random unit vector; rasters embed through a
    fixed random linear projection, so the image path is differentiable.
    An optional text_vectors map pins chosen prompts to exact vectors.
    """

    def __init__(self, dim: int = 16, seed: int = 0, text_vectors: Optional[dict] = None):
        self.dim = int(dim)
        self.seed = int(seed)
        self.differentiable = True
        self._text_vectors = {k: _unit(np.asarray(v, np.float64)) for k, v in (text_vectors or {}).items()}
        self._proj: dict = {}  # raster pixel count -> projection matrix

    def _projection(self, n_in: int) -> torch.Tensor:
        if n_in not in self._proj:
            rng = np.random.default_rng([self.seed, 31, n_in])
            mat = rng.standard_normal((self.dim, n_in)) / math.sqrt(n_in)
            # small fixed offset keeps the all-zero raster normalizable
            bias = rng.standard_normal(self.dim) * 1e-3
            self._proj[n_in] = (
                torch.from_numpy(mat),
                torch.from_numpy(bias),
            )
        return self._proj[n_in]

    def embed_text(self, text: str) -> np.ndarray:
        if text in self._text_vectors:
            return self._text_vectors[text].copy()
        return _hash_unit_vector(text, self.dim, self.seed)

    def embed_image(self, raster) -> torch.Tensor:
        if not isinstance(raster, torch.Tensor):
            raster = torch.from_numpy(np.array(raster, dtype=np.float64))
        flat = raster.reshape(-1).to(torch.float64)
        mat, bias = self._projection(flat.numel())
        v = mat @ flat + bias
        return v / torch.sqrt((v * v).sum() + 1e-30)


class FileEmbeddingProvider:
    """Precomputed embeddings keyed by exact text, loaded from one JSON file."""

    def __init__(self, path):
        data = json.loads(Path(path).read_text())
        self.dim = int(data["dim"])
        self.differentiable = False
        self._texts = {
            k: _unit(np.asarray(v, dtype=np.float64)) for k, v in data.get("texts", {}).items()
        }

    def embed_text(self, text: str) -> np.ndarray:
        try:
            return self._texts[text].copy()
        except KeyError:
            raise KeyError(f"no precomputed embedding for text {text!r}") from None

    def embed_image(self, raster):
        raise NotDifferentiable("file-backed provider cannot embed rasters")


class RemoteEmbeddingProvider:
    """Client for a remote embedding service.

    POST {base_url}/embed with {"kind": "text"|"image", "payload": ...} and
    expects {"vector": [floats]} back. A custom ``post`` callable can be
    injected for testing or alternative transports.
    """

    def __init__(self, base_url: str, dim: int, post: Optional[Callable] = None, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.dim = int(dim)
        self.differentiable = False
        self.timeout = float(timeout)
        self._post = post or self._urllib_post

    def _urllib_post(self, url: str, payload: dict) -> dict:
        req = urllib.request.Request(
            url,
            data=json.dumps(payload).encode(),
            headers={"Content-Type": "application/json"},
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode())

    def _embed(self, kind: str, payload) -> np.ndarray:
        out = self._post(f"{self.base_url}/embed", {"kind": kind, "payload": payload})
        vec = np.asarray(out["vector"], dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValueError(f"remote embedder returned shape {vec.shape}, expected ({self.dim},)")
        return _unit(vec)

    def embed_text(self, text: str) -> np.ndarray:
        return self._embed("text", text)

    def embed_image(self, raster) -> np.ndarray:
        arr = raster.detach().numpy() if isinstance(raster, torch.Tensor) else np.asarray(raster)
        return self._embed("image", arr.tolist())


# ---------------------------------------------------------------------------
# Toy differentiable renderer
# ---------------------------------------------------------------------------

# behind-camera gating temperature and the projection depth floor; both keep
# the raster smooth in every camera parameter
_GATE_TEMP = 0.1
_DEPTH_EPS = 1e-3
_MIN_SIGMA = 0.02


def _rot6d_to_matrix_t(v: torch.Tensor) -> torch.Tensor:
    """Differentiable Gram-Schmidt; torch twin of the numpy conversion."""
    a, b = v[:3], v[3:]
    x = a / torch.sqrt((a * a).sum() + 1e-30)
    b = b - (x * b).sum() * x
    y = b / torch.sqrt((b * b).sum() + 1e-30)
    z = torch.linalg.cross(x, y)
    return torch.stack([x, y, z], dim=1)


def _render_params(
    scene: Scene, rot6d: torch.Tensor, trans: torch.Tensor, focal: torch.Tensor, resolution: int
) -> torch.Tensor:
    raster = torch.zeros(resolution, resolution, 3, dtype=torch.float64)
    if not scene.content:
        return raster
    r = _rot6d_to_matrix_t(rot6d)
    axis = torch.linspace(-1.0, 1.0, resolution, dtype=torch.float64)
    gy, gx = torch.meshgrid(-axis, axis, indexing="ij")  # row 0 is +y (up)
    for blob in scene.content:
        p = torch.from_numpy(blob.center.copy())
        color = torch.from_numpy(blob.color.copy())
        d = r.T @ (p - trans)
        depth = -d[2]  # camera looks along -z
        gate = torch.sigmoid(depth / _GATE_TEMP)
        denom = torch.nn.functional.softplus(depth, beta=20.0) + _DEPTH_EPS
        u = focal * d[0] / denom
        v = focal * d[1] / denom
        sigma_raw = blob.radius * focal / denom
        sigma = torch.sqrt(sigma_raw * sigma_raw + _MIN_SIGMA**2)
        w = gate * torch.exp(-((gx - u) ** 2 + (gy - v) ** 2) / (2.0 * sigma * sigma))
        raster = raster + w.unsqueeze(-1) * color
    return raster


def toy_render(scene: Scene, camera, resolution: int = 32) -> torch.Tensor:
    """Splat scene blobs through a perspective camera into an RGB raster.

    ``camera`` is a CameraFrame, or a (rot6d, trans, focal) tuple of torch
    tensors when gradients with respect to the camera are needed. Content
    behind the camera is smoothly gated to zero contribution.
    """
    if isinstance(camera, CameraFrame):
        rot6d = torch.from_numpy(camera.rot.as_array().copy())
        trans = torch.from_numpy(camera.trans.copy())
        focal = torch.tensor(camera.focal, dtype=torch.float64)
    else:
        rot6d, trans, focal = camera
    return _render_params(scene, rot6d, trans, focal, int(resolution))


# ---------------------------------------------------------------------------
# Selection (cosine argmax)
# ---------------------------------------------------------------------------


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(_unit(a), _unit(b)))


def select_initial_anchor(scene: Scene, provider, prompt: str) -> AnchorResult:
    """Best-matching posed image by cosine similarity; ties -> lowest index."""
    if not scene.images:
        raise EmptyScene("scene has no posed images to select from")
    text_vec = np.asarray(provider.embed_text(prompt), dtype=np.float64)
    best_idx, best_score = 0, -np.inf
    for i, img in enumerate(scene.images):
        score = _cosine(img.embedding, text_vec)
        if score > best_score:
            best_idx, best_score = i, score
    winner = scene.images[best_idx]
    return AnchorResult(
        camera=winner.camera,
        score=best_score,
        source_image_id=winner.image_id,
        refinement_steps=0,
        outside_bounds=not scene.contains(winner.camera.trans),
    )


# ---------------------------------------------------------------------------
# Refinement (gradient descent on negative cosine)
# ---------------------------------------------------------------------------


def grounding_score(scene: Scene, provider, prompt: str, camera) -> float:
    """Negative cosine between the rendered view's embedding and the prompt's."""
    raster = toy_render(scene, camera)
    image_vec = provider.embed_image(raster)
    if isinstance(image_vec, torch.Tensor):
        image_vec = image_vec.detach().numpy()
    text_vec = np.asarray(provider.embed_text(prompt), dtype=np.float64)
    return -_cosine(image_vec, text_vec)


def _orthonormalize6_t(v: torch.Tensor) -> torch.Tensor:
    r = _rot6d_to_matrix_t(v)
    return torch.cat([r[:, 0], r[:, 1]])


def refine_anchor(
    scene: Scene,
    provider,
    prompt: str,
    init: Optional[CameraFrame] = None,
    lr: float = 0.002,
    max_steps: int = 1000,
    tol: float = 1e-7,
    include_focal: bool = True,
    resolution: int = 32,
    objective: Optional[Callable] = None,
) -> AnchorResult:
    """Gradient-descend the anchor camera on the grounding objective.

    The camera is parameterized as (rot6d, trans, focal) jointly; rot6d is
    re-orthonormalized after every accepted step. Steps that would increase
    the loss are halved (backtracking); iteration stops at max_steps, when
    the step cannot decrease the loss, or when |dL| < tol. ``objective`` may
    replace the default render->embed->cosine loss with any callable of
    (rot6d, trans, focal) returning a scalar tensor.
    """
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    source_image_id = ""
    if init is None:
        selected = select_initial_anchor(scene, provider, prompt)
        init, source_image_id = selected.camera, selected.source_image_id
    if objective is None:
        if not getattr(provider, "differentiable", False):
            raise NotDifferentiable(
                "refinement needs a differentiable embedding provider"
            )
        if not scene.content:
            raise EmptyScene("scene has no renderable content to refine against")
        text_vec = torch.from_numpy(
            _unit(np.asarray(provider.embed_text(prompt), dtype=np.float64))
        )

        def objective(rot6d, trans, focal):
            raster = _render_params(scene, rot6d, trans, focal, int(resolution))
            image_vec = provider.embed_image(raster)
            return -(image_vec * text_vec).sum()

    rot6d = torch.from_numpy(init.rot.as_array().copy())
    trans = torch.from_numpy(init.trans.copy())
    focal = torch.tensor(init.focal, dtype=torch.float64)

    def loss_at(r, t, f):
        return objective(r, t, f)

    params = [rot6d, trans, focal]
    for p in params:
        p.requires_grad_(True)
    loss = loss_at(*params)
    steps = 0
    for _ in range(int(max_steps)):
        grads = torch.autograd.grad(loss, params, allow_unused=True)
        grads = [
            torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)
        ]
        if not include_focal:
            grads[2] = torch.zeros_like(grads[2])
        if max(float(g.abs().max()) for g in grads) < 1e-15:
            break
        step_lr = float(lr)
        accepted = None
        for _ in range(40):  # backtracking halving
            cand = [
                (p - step_lr * g).detach() for p, g in zip(params, grads)
            ]
            cand[0] = _orthonormalize6_t(cand[0]).detach()
            cand[2] = torch.clamp(cand[2], min=1e-3)
            for c in cand:
                c.requires_grad_(True)
            cand_loss = loss_at(*cand)
            if float(cand_loss.detach()) <= float(loss.detach()):
                accepted = (cand, cand_loss)
                break
            step_lr *= 0.5
        if accepted is None:
            break
        delta = abs(float(loss.detach()) - float(accepted[1].detach()))
        params, loss = accepted
        steps += 1
        if delta < tol:
            break

    rot = orthonormalize_rot6d(params[0].detach().numpy())
    camera = CameraFrame(
        rot=rot if steps else init.rot,
        trans=params[1].detach().numpy() if steps else init.trans,
        focal=float(params[2].detach()) if steps else init.focal,
    )
    return AnchorResult(
        camera=camera,
        score=-float(loss.detach()),
        source_image_id=source_image_id,
        refinement_steps=steps,
        outside_bounds=not scene.contains(camera.trans),
    )
