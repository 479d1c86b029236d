"""Discrete trajectory codec: temporal-conv VQ-VAE over per-frame features.

A trajectory is flattened to M x 10 features (6 rotation, 3 translation, 1
focal), encoded by two stride-2 1D convolutions to L = M/4 latent rows,
vector-quantized against a learned codebook, and mirrored back by transposed
convolutions. A linear head on the pooled latent regresses log duration.

Feature normalization: translation is divided by the corpus standard
deviation, focal is log-transformed, the 6D rotation encoding is used raw.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .checkpoint import read_checkpoint, write_checkpoint
from .errors import ShapeError, TrainingDiverged
from .geometry import CameraFrame, Trajectory, orthonormalize_rot6d

log = logging.getLogger(__name__)

FEATURE_DIM = 10  # 6 rot6d + 3 trans + 1 log-focal


@dataclass(frozen=True)
class TokenizerConfig:
    frames: int = 120            # M; must be divisible by downsample
    hidden: int = 64
    latent_dim: int = 256        # d
    codebook_size: int = 256     # K
    downsample: int = 4          # l, fixed by the two stride-2 blocks
    beta: float = 0.25           # commitment weight
    lr: float = 1e-4
    batch_size: int = 8
    steps: int = 2000
    dead_code_steps: int = 256
    data_init: bool = False      # seed codebook from encoder outputs before training
    dtype: str = "float32"

    def torch_dtype(self) -> torch.dtype:
        return {"float32": torch.float32, "float64": torch.float64}[self.dtype]


@dataclass(frozen=True)
class TrajTokenSeq:
    ids: tuple
    duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if len(self.ids) < 1:
            raise ValueError("token sequence must be non-empty")


class TokenizerNet(nn.Module):
    """Encoder/decoder pair plus codebook and duration head."""

    def __init__(self, config: TokenizerConfig, trans_std: float = 1.0):
        super().__init__()
        if config.downsample != 4:
            raise ValueError("architecture fixes the downsample rate at 4")
        self.config = config
        d, h = config.latent_dim, config.hidden
        self.enc1 = nn.Conv1d(FEATURE_DIM, h, kernel_size=3, stride=2, padding=1)
        self.enc2 = nn.Conv1d(h, d, kernel_size=3, stride=2, padding=1)
        self.dec1 = nn.ConvTranspose1d(d, h, kernel_size=3, stride=2, padding=1, output_padding=1)
        self.dec2 = nn.ConvTranspose1d(
            h, FEATURE_DIM, kernel_size=3, stride=2, padding=1, output_padding=1
        )
        self.dur_head = nn.Linear(d, 1)
        self.codebook = nn.Parameter(torch.zeros(config.codebook_size, d))
        self.register_buffer("trans_std", torch.tensor(float(trans_std), dtype=torch.float64))
        self.to(config.torch_dtype())

    def reset_parameters(self, generator: torch.Generator) -> None:
        with torch.no_grad():
            for mod in (self.enc1, self.enc2, self.dec1, self.dec2, self.dur_head):
                w = mod.weight
                fan_in = w.shape[1] * (w.shape[2] if w.dim() == 3 else 1)
                bound = 1.0 / math.sqrt(fan_in)
                for p in (mod.weight, mod.bias):
                    p.copy_(
                        (torch.rand(p.shape, generator=generator, dtype=torch.float64) * 2 - 1)
                        * bound
                    )
            k = self.config.codebook_size
            self.codebook.copy_(
                (torch.rand(self.codebook.shape, generator=generator, dtype=torch.float64) * 2 - 1)
                / k
            )

    def encode_features(self, feats: torch.Tensor) -> torch.Tensor:
        """(B, M, F) -> (B, L, d)."""
        x = feats.transpose(1, 2)
        z = self.enc2(torch.relu(self.enc1(x)))
        return z.transpose(1, 2)

    def decode_latent(self, latent: torch.Tensor) -> torch.Tensor:
        """(B, L, d) -> (B, M, F)."""
        x = latent.transpose(1, 2)
        y = self.dec2(torch.relu(self.dec1(x)))
        return y.transpose(1, 2)


# ---------------------------------------------------------------------------
# Feature packing
# ---------------------------------------------------------------------------


def corpus_trans_std(trajs: Sequence[Trajectory]) -> float:
    vals = np.concatenate([np.stack([f.trans for f in t.frames]).ravel() for t in trajs])
    return max(float(vals.std()), 1e-6)


# log-focal spans roughly +-0.7 while the rotation channels span +-1 each;
# without a gain the single focal channel is drowned out of the feature MSE
FOCAL_GAIN = 3.0


def trajectory_features(net: TokenizerNet, traj: Trajectory) -> torch.Tensor:
    """(M, 10) normalized feature tensor in the net's dtype."""
    std = float(net.trans_std)
    rows = []
    for f in traj.frames:
        rows.append(
            np.concatenate(
                [f.rot.as_array(), f.trans / std, [FOCAL_GAIN * math.log(f.focal)]]
            )
        )
    return torch.tensor(np.stack(rows), dtype=net.config.torch_dtype())


def features_to_trajectory(net: TokenizerNet, feats: torch.Tensor, duration_s: float) -> Trajectory:
    arr = feats.detach().cpu().numpy().astype(np.float64)
    std = float(net.trans_std)
    frames = []
    for row in arr:
        frames.append(
            CameraFrame(
                rot=orthonormalize_rot6d(row[:6]),
                trans=row[6:9] * std,
                focal=math.exp(float(np.clip(row[9] / FOCAL_GAIN, -6.0, 6.0))),
            )
        )
    return Trajectory(frames=tuple(frames), duration_s=duration_s)


# ---------------------------------------------------------------------------
# Core codec operations
# ---------------------------------------------------------------------------


def encode(net: TokenizerNet, traj: Trajectory) -> torch.Tensor:
    """Trajectory -> (L, d) latent rows, L = M / downsample."""
    m = len(traj)
    if m % net.config.downsample != 0:
        raise ShapeError(
            f"frame count {m} not divisible by downsample {net.config.downsample}; resample first"
        )
    feats = trajectory_features(net, traj).unsqueeze(0)
    return net.encode_features(feats).squeeze(0)


def quantize(codebook: torch.Tensor, latent: torch.Tensor) -> tuple:
    """Nearest codebook entry per latent row.

    Returns (ids int64 array, quantized rows). Squared distances are computed
    elementwise so exact ties stay exact; ties break to the lowest index.
    """
    cb = codebook if isinstance(codebook, torch.Tensor) else torch.as_tensor(codebook)
    lat = latent.to(cb.dtype)
    d2 = ((lat.unsqueeze(1) - cb.unsqueeze(0)) ** 2).sum(-1)
    ids = np.argmin(d2.detach().cpu().numpy(), axis=1)  # first occurrence on ties
    return ids, cb[torch.from_numpy(ids)]


def decode(net: TokenizerNet, ids, duration_s: float) -> Trajectory:
    """Token ids -> trajectory with M = len(ids) * downsample frames."""
    ids = np.asarray([int(i) for i in ids], dtype=np.int64)
    if ids.size < 1:
        raise ValueError("need at least one token id")
    if ids.min() < 0 or ids.max() >= net.config.codebook_size:
        raise IndexError(f"token id out of range [0, {net.config.codebook_size})")
    with torch.no_grad():
        latent = net.codebook[torch.from_numpy(ids)].unsqueeze(0)
        feats = net.decode_latent(latent).squeeze(0)
    return features_to_trajectory(net, feats, duration_s)


def tokenize(net: TokenizerNet, traj: Trajectory) -> TrajTokenSeq:
    ids, _ = quantize(net.codebook, encode(net, traj))
    return TrajTokenSeq(ids=tuple(ids.tolist()), duration_s=traj.duration_s)


def predicted_duration(net: TokenizerNet, ids) -> float:
    """Duration regressed by the tokenizer head (used when none is supplied)."""
    ids = np.asarray([int(i) for i in ids], dtype=np.int64)
    with torch.no_grad():
        pooled = net.codebook[torch.from_numpy(ids)].mean(dim=0, keepdim=True)
        return float(torch.exp(net.dur_head(pooled)).item())


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def tokenizer_loss(net: TokenizerNet, batch: Sequence[Trajectory]) -> tuple:
    """(reconstruction, embedding, commitment) losses over a trajectory batch.

    reconstruction: elementwise MSE on features plus squared log-duration
    error from the duration head. embedding: per-row squared distance
    |sg(z) - q|^2 averaged over rows, pulling the codebook toward encoder
    outputs. commitment: beta * |z - sg(q)|^2, pulling the encoder toward the
    codebook. The decoder sees z + sg(q - z), so its gradients reach the
    encoder straight through the quantization.
    """
    feats = torch.stack([trajectory_features(net, t) for t in batch])
    log_dur = torch.tensor(
        [math.log(t.duration_s) for t in batch], dtype=feats.dtype
    ).unsqueeze(1)
    z = net.encode_features(feats)
    flat = z.reshape(-1, z.shape[-1])
    ids, q_flat = quantize(net.codebook, flat)
    q = q_flat.reshape(z.shape)
    st = z + (q - z).detach()
    recon_feats = net.decode_latent(st)
    dur_pred = net.dur_head(st.mean(dim=1))
    recon = ((recon_feats - feats) ** 2).mean() + ((dur_pred - log_dur) ** 2).mean()
    embed = ((q - z.detach()) ** 2).sum(-1).mean()
    commit = net.config.beta * ((z - q.detach()) ** 2).sum(-1).mean()
    return recon, embed, commit


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TokenizerTrainResult:
    net: TokenizerNet
    step_losses: list = field(default_factory=list)
    epoch_losses: list = field(default_factory=list)
    codes_used: set = field(default_factory=set)


def train_tokenizer(
    corpus: Sequence[Trajectory],
    config: Optional[TokenizerConfig] = None,
    seed: int = 0,
) -> TokenizerTrainResult:
    """Deterministic full training loop on CPU.

    Dead codebook entries (unused for dead_code_steps optimizer steps) are
    re-seeded to encoder outputs from the current batch.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    config = config or TokenizerConfig()
    gen = torch.Generator().manual_seed(int(seed))
    net = TokenizerNet(config, trans_std=corpus_trans_std(corpus))
    net.reset_parameters(gen)
    if config.data_init:
        with torch.no_grad():
            # seed the codebook from encoder outputs so entries start in-distribution
            feats = torch.stack([trajectory_features(net, t) for t in corpus])
            flat0 = net.encode_features(feats).reshape(-1, config.latent_dim)
            pick = torch.randint(0, flat0.shape[0], (config.codebook_size,), generator=gen)
            jitter = torch.randn(net.codebook.shape, generator=gen, dtype=torch.float64) * 1e-3
            net.codebook.copy_(flat0[pick].double() + jitter)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)

    n = len(corpus)
    batch_size = min(config.batch_size, n)
    steps_per_epoch = max(1, math.ceil(n / batch_size))
    idle = np.zeros(config.codebook_size, dtype=np.int64)
    result = TokenizerTrainResult(net=net)
    order = torch.randperm(n, generator=gen).tolist()
    cursor = 0
    epoch_accum = []

    for step in range(config.steps):
        if cursor + batch_size > n:
            order = torch.randperm(n, generator=gen).tolist()
            cursor = 0
        batch = [corpus[i] for i in order[cursor : cursor + batch_size]]
        cursor += batch_size

        recon, embed, commit = tokenizer_loss(net, batch)
        total = recon + embed + commit
        if not torch.isfinite(total):
            raise TrainingDiverged(f"loss became {total.item()} at step {step}")
        opt.zero_grad()
        total.backward()
        opt.step()

        with torch.no_grad():
            feats = torch.stack([trajectory_features(net, t) for t in batch])
            flat = net.encode_features(feats).reshape(-1, config.latent_dim)
            ids, _ = quantize(net.codebook, flat)
        used = np.unique(ids)
        result.codes_used.update(int(i) for i in used)
        idle += 1
        idle[used] = 0
        dead = np.where(idle >= config.dead_code_steps)[0]
        if dead.size:
            with torch.no_grad():
                pick = torch.randint(0, flat.shape[0], (dead.size,), generator=gen)
                net.codebook[torch.from_numpy(dead)] = flat[pick]
            idle[dead] = 0

        result.step_losses.append(float(total.item()))
        epoch_accum.append(float(total.item()))
        if len(epoch_accum) == steps_per_epoch:
            result.epoch_losses.append(sum(epoch_accum) / len(epoch_accum))
            epoch_accum = []
            log.info(
                "epoch %d: loss %.6f (recon %.6f)",
                len(result.epoch_losses),
                result.epoch_losses[-1],
                float(recon.item()),
            )
    if epoch_accum:
        result.epoch_losses.append(sum(epoch_accum) / len(epoch_accum))
    return result


def reconstruction_trans_mse(net: TokenizerNet, traj: Trajectory) -> float:
    """Encode/quantize/decode round trip; translation MSE in normalized units."""
    seq = tokenize(net, traj)
    recon = decode(net, seq.ids, traj.duration_s)
    std = float(net.trans_std)
    err = 0.0
    for fa, fb in zip(traj.frames, recon.frames):
        err += float(np.sum(((fa.trans - fb.trans) / std) ** 2))
    return err / len(traj)


# ---------------------------------------------------------------------------
# Checkpoint I/O
# ---------------------------------------------------------------------------

_CKPT_KIND = "trajectory-tokenizer"


def save_tokenizer(net: TokenizerNet, path) -> None:
    arrays = {k: v.detach().cpu().numpy() for k, v in net.state_dict().items()}
    config = {
        "frames": net.config.frames,
        "hidden": net.config.hidden,
        "latent_dim": net.config.latent_dim,
        "codebook_size": net.config.codebook_size,
        "downsample": net.config.downsample,
        "beta": net.config.beta,
        "lr": net.config.lr,
        "batch_size": net.config.batch_size,
        "steps": net.config.steps,
        "dead_code_steps": net.config.dead_code_steps,
        "dtype": net.config.dtype,
    }
    write_checkpoint(path, _CKPT_KIND, config, arrays)


def load_tokenizer(path) -> TokenizerNet:
    kind, config, arrays = read_checkpoint(path)
    if kind != _CKPT_KIND:
        from .errors import CheckpointError

        raise CheckpointError(f"expected {_CKPT_KIND} checkpoint, got {kind!r}")
    net = TokenizerNet(TokenizerConfig(**config))
    state = {k: torch.from_numpy(v.copy()) for k, v in arrays.items()}
    net.load_state_dict(state)
    return net
