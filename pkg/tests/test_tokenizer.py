"""Tests for the VQ trajectory codec.

The gradient check runs finite differences against a "frozen stops" version
of the loss: every stop-gradient argument (token assignments, the
straight-through offset, the detached latents) is pinned to its base-point
value. That closure is differentiable everywhere, so central differences are
valid, and its autograd gradients are asserted to coincide exactly with the
production loss gradients at the base point.
"""

import math
import time

import numpy as np
import pytest
import torch

from camtraj.dataset import MotionPrimitive, gen_primitive, generate_dataset
from camtraj.errors import CheckpointError, ShapeError, TrainingDiverged
from camtraj.geometry import Trajectory
from camtraj.tokenizer import (
    FEATURE_DIM,
    TokenizerConfig,
    TokenizerNet,
    TrajTokenSeq,
    decode,
    encode,
    load_tokenizer,
    predicted_duration,
    quantize,
    reconstruction_trans_mse,
    save_tokenizer,
    tokenize,
    tokenizer_loss,
    train_tokenizer,
    trajectory_features,
)

MINI = TokenizerConfig(
    frames=8, hidden=8, latent_dim=8, codebook_size=4, batch_size=2, dtype="float64"
)


def mini_net(seed=0, config=MINI) -> TokenizerNet:
    net = TokenizerNet(config)
    net.reset_parameters(torch.Generator().manual_seed(seed))
    return net


def small_corpus(n=4, m=8):
    rng = np.random.default_rng(100)
    from camtraj.dataset import sample_primitive

    out = []
    for _ in range(n):
        p = sample_primitive(rng)
        out.append(gen_primitive(p, m, 4.0))
    return out


def zero_net(config=MINI) -> TokenizerNet:
    net = TokenizerNet(config)
    with torch.no_grad():
        for p in net.parameters():
            p.zero_()
    return net


def frozen_stops_worst_rel_err(net, batch):
    """Central-difference check of the production VQ loss over all parameters.

    Returns the worst relative error between the frozen-stops closure's
    autograd gradients and central finite differences. Before differencing,
    the closure is asserted to reproduce the production loss value and
    gradients exactly at the base point, which is what makes the finite
    differences meaningful despite the stop-gradients in the real loss.
    """
    feats = torch.stack([trajectory_features(net, t) for t in batch])
    log_dur = torch.tensor(
        [math.log(t.duration_s) for t in batch], dtype=feats.dtype
    ).unsqueeze(1)

    with torch.no_grad():
        z0 = net.encode_features(feats)
        flat0 = z0.reshape(-1, z0.shape[-1])
        ids0, q0_flat = quantize(net.codebook, flat0)
        q0 = q0_flat.reshape(z0.shape)
        offset0 = q0 - z0
    ids0_t = torch.from_numpy(ids0)

    def frozen_loss():
        z = net.encode_features(feats)
        st = z + offset0
        recon_feats = net.decode_latent(st)
        dur_pred = net.dur_head(st.mean(dim=1))
        recon = ((recon_feats - feats) ** 2).mean() + ((dur_pred - log_dur) ** 2).mean()
        q = net.codebook[ids0_t].reshape(z0.shape)
        embed = ((q - z0) ** 2).sum(-1).mean()
        commit = net.config.beta * ((z - q0) ** 2).sum(-1).mean()
        return recon + embed + commit

    params = list(net.parameters())

    # 1) frozen closure gradients must equal production loss gradients
    prod = sum(tokenizer_loss(net, batch))
    g_prod = torch.autograd.grad(prod, params, allow_unused=True)
    froz = frozen_loss()
    g_froz = torch.autograd.grad(froz, params, allow_unused=True)
    assert float(froz) == pytest.approx(float(prod), abs=1e-12)
    for gp, gf in zip(g_prod, g_froz):
        gp = torch.zeros(1) if gp is None else gp
        gf = torch.zeros(1) if gf is None else gf
        assert torch.allclose(gp, gf, atol=1e-12), "closure must mirror production grads"

    # 2) central finite differences on the frozen closure
    eps = 1e-6
    worst = 0.0
    for p, g in zip(params, g_froz):
        flat_p = p.data.view(-1)
        flat_g = g.view(-1)
        for j in range(flat_p.numel()):
            orig = float(flat_p[j])
            with torch.no_grad():
                flat_p[j] = orig + eps
                up = float(frozen_loss())
                flat_p[j] = orig - eps
                down = float(frozen_loss())
                flat_p[j] = orig
            fd = (up - down) / (2 * eps)
            an = float(flat_g[j])
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
            worst = max(worst, rel)
    return worst


class TestEncode:
    def test_shape_law(self):
        net = mini_net()
        traj = gen_primitive(MotionPrimitive(kind="static"), 8, 4.0)
        assert encode(net, traj).shape == (2, 8)
        cfg = TokenizerConfig(frames=120, hidden=8, latent_dim=16, codebook_size=8)
        net120 = TokenizerNet(cfg)
        traj120 = gen_primitive(MotionPrimitive(kind="static"), 120, 4.0)
        assert encode(net120, traj120).shape == (30, 16)
        traj4 = gen_primitive(MotionPrimitive(kind="static"), 4, 4.0)
        assert encode(net120, traj4).shape == (1, 16)

    def test_not_divisible_raises(self):
        net = mini_net()
        traj = gen_primitive(MotionPrimitive(kind="static"), 10, 4.0)
        with pytest.raises(ShapeError):
            encode(net, traj)

    def test_zero_net_constant_rows(self):
        net = zero_net()
        traj = gen_primitive(MotionPrimitive(kind="dolly", magnitude=1.0, direction=1), 8, 4.0)
        z = encode(net, traj)
        assert torch.allclose(z, z[0].expand_as(z), atol=0)


class TestQuantize:
    def test_hand_cases(self):
        cb = torch.tensor([[0.0, 0.0], [1.0, 1.0]], dtype=torch.float64)
        ids, q = quantize(cb, torch.tensor([[0.2, 0.1]], dtype=torch.float64))
        assert list(ids) == [0]
        assert torch.equal(q[0], cb[0])

    def test_exact_tie_lowest_index(self):
        cb = torch.tensor([[0.0, 0.0], [1.0, 1.0]], dtype=torch.float64)
        ids, _ = quantize(cb, torch.tensor([[0.5, 0.5]], dtype=torch.float64))
        assert list(ids) == [0]
        # and with the entries swapped the tie still picks the lowest index
        ids2, _ = quantize(cb.flip(0), torch.tensor([[0.5, 0.5]], dtype=torch.float64))
        assert list(ids2) == [0]

    def test_brute_force_oracle_1000(self):
        rng = np.random.default_rng(55)
        cb_np = rng.normal(size=(16, 8))
        lat_np = rng.normal(size=(1000, 8))
        # force some exact ties by duplicating codebook rows
        cb_np[7] = cb_np[3]
        cb = torch.tensor(cb_np)
        lat = torch.tensor(lat_np)
        start = time.monotonic()
        ids, q = quantize(cb, lat)
        elapsed = time.monotonic() - start
        # oracle: exhaustive scan, first index of the minimum
        for i in range(1000):
            d = [float(np.sum((lat_np[i] - cb_np[k]) ** 2)) for k in range(16)]
            best = min(range(16), key=lambda k: (d[k], k))
            assert ids[i] == best
        assert elapsed < 1.0

    def test_rows_belong_to_codebook_and_optimal(self):
        rng = np.random.default_rng(56)
        cb = torch.tensor(rng.normal(size=(12, 5)))
        lat = torch.tensor(rng.normal(size=(64, 5)))
        ids, q = quantize(cb, lat)
        for i in range(64):
            assert any(torch.equal(q[i], cb[k]) for k in range(12))
            chosen = torch.sum((lat[i] - q[i]) ** 2)
            for k in range(12):
                assert chosen <= torch.sum((lat[i] - cb[k]) ** 2) + 1e-12


class TestDecode:
    def test_shape_and_determinism(self):
        net = mini_net()
        out1 = decode(net, [0], 4.0)
        out2 = decode(net, [0], 4.0)
        assert len(out1) == 4  # L=1 -> M=downsample
        assert out1 == out2
        assert out1.duration_s == 4.0

    def test_invalid_id(self):
        net = mini_net()
        with pytest.raises(IndexError):
            decode(net, [99], 4.0)

    def test_tokenize_round_trip_types(self):
        net = mini_net()
        traj = gen_primitive(MotionPrimitive(kind="pan", magnitude=45, direction=1), 8, 4.0)
        seq = tokenize(net, traj)
        assert isinstance(seq, TrajTokenSeq)
        assert all(0 <= i < 4 for i in seq.ids)
        assert len(seq.ids) == 2
        recon = decode(net, seq.ids, seq.duration_s)
        assert len(recon) == 8

    def test_predicted_duration_positive(self):
        net = mini_net()
        assert predicted_duration(net, [0, 1]) > 0


class TestLoss:
    def test_all_terms_zero_when_perfect(self):
        # static trajectory at focal 1, duration 1: every feature row is
        # (1,0,0,0,1,0, 0,0,0, 0). A zero net with dec2 bias set to that row
        # reconstructs it exactly, and codebook row 0 at the zero latent
        # makes embed and commit vanish.
        net = zero_net()
        row = torch.zeros(FEATURE_DIM, dtype=torch.float64)
        row[0] = 1.0
        row[4] = 1.0
        with torch.no_grad():
            net.dec2.bias.copy_(row)
        traj_frames = gen_primitive(MotionPrimitive(kind="static"), 8, 4.0, focal0=1.0)
        traj = Trajectory(frames=traj_frames.frames, duration_s=1.0)
        recon, embed, commit = tokenizer_loss(net, [traj])
        assert float(recon.detach()) == pytest.approx(0.0, abs=1e-24)
        assert float(embed.detach()) == 0.0
        assert float(commit.detach()) == 0.0

    def test_distance_one_definitions(self):
        # zero net -> latents are the zero vector; nearest codebook entry at
        # distance 1 gives embed = 1 and commit = beta = 0.25 by definition
        net = zero_net()
        with torch.no_grad():
            net.codebook[0, 0] = 1.0  # |e0 - 0|^2 = 1
            net.codebook[1:] = 100.0
        traj = gen_primitive(MotionPrimitive(kind="static"), 8, 4.0)
        _, embed, commit = tokenizer_loss(net, [traj])
        assert float(embed) == pytest.approx(1.0, abs=1e-12)
        assert float(commit) == pytest.approx(0.25, abs=1e-12)

    def test_gradcheck_frozen_stops(self):
        start = time.monotonic()
        worst = frozen_stops_worst_rel_err(mini_net(seed=3), small_corpus(n=2, m=8))
        elapsed = time.monotonic() - start
        assert worst < 1e-4, f"worst rel err {worst:.3e}"
        assert elapsed < 30.0, f"gradcheck took {elapsed:.1f}s"


class TestTraining:
    def test_epoch_losses_strictly_decrease_first_10(self):
        corpus = [p.traj for p in generate_dataset(8, seed=2)]
        cfg = TokenizerConfig(steps=10, batch_size=8)  # full batch: 1 step/epoch
        res = train_tokenizer(corpus, cfg, seed=0)
        el = res.epoch_losses
        assert len(el) == 10
        assert all(b < a for a, b in zip(el, el[1:])), el

    def test_determinism_bitwise(self, tmp_path):
        corpus = [p.traj for p in generate_dataset(4, seed=3)]
        cfg = TokenizerConfig(steps=25, hidden=16, latent_dim=16, codebook_size=16)
        r1 = train_tokenizer(corpus, cfg, seed=11)
        r2 = train_tokenizer(corpus, cfg, seed=11)
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_tokenizer(r1.net, a)
        save_tokenizer(r2.net, b)
        assert a.read_bytes() == b.read_bytes()

    def test_divergence_detected(self):
        corpus = [p.traj for p in generate_dataset(2, seed=4)]
        cfg = TokenizerConfig(steps=50, lr=1e12, hidden=8, latent_dim=8, codebook_size=4)
        with pytest.raises(TrainingDiverged):
            train_tokenizer(corpus, cfg, seed=0)

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            train_tokenizer([], TokenizerConfig(), seed=0)


class TestCheckpoint:
    def test_save_load_round_trip(self, tmp_path):
        net = mini_net(seed=5)
        path = tmp_path / "tok.ckpt"
        save_tokenizer(net, path)
        net2 = load_tokenizer(path)
        assert net2.config == net.config
        sd1, sd2 = net.state_dict(), net2.state_dict()
        assert set(sd1) == set(sd2)
        for k in sd1:
            assert torch.equal(sd1[k], sd2[k])
        traj = gen_primitive(MotionPrimitive(kind="tilt", magnitude=30, direction=1), 8, 4.0)
        assert tokenize(net, traj) == tokenize(net2, traj)

    def test_wrong_kind_rejected(self, tmp_path):
        from camtraj.checkpoint import write_checkpoint

        path = tmp_path / "other.ckpt"
        write_checkpoint(path, "something-else", {}, {})
        with pytest.raises(CheckpointError):
            load_tokenizer(path)
