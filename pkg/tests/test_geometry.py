"""Tests for camera pose and trajectory primitives.

Expected values are computed by independent oracles inside the test file
(explicit Gram-Schmidt arithmetic, closed-form rotation matrices, naive loops)
rather than by the functions under test.
"""

import math
import time

import numpy as np
import pytest

from camtraj.errors import DegenerateRotation, InvalidRotation, LengthMismatch
from camtraj.geometry import (
    CameraFrame,
    Rot6D,
    SimilarityTransform,
    Trajectory,
    align_endpoint,
    apply_similarity,
    axis_angle_matrix,
    camera_path_dict,
    concatenate,
    frame_velocities,
    geodesic_angle,
    matrix_to_quat,
    matrix_to_rot6d,
    orthonormalize_rot6d,
    resample,
    rot6d_to_matrix,
    slerp_matrix,
    trajectory_from_dict,
    trajectory_mse,
    trajectory_to_dict,
)

RNG = np.random.default_rng(20240811)


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random rotation via QR with sign fix (oracle helper)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def yaw(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def make_traj(rng, m=6, duration=2.0) -> Trajectory:
    frames = []
    for _ in range(m):
        frames.append(
            CameraFrame(
                rot=matrix_to_rot6d(random_rotation(rng)),
                trans=rng.normal(size=3),
                focal=float(rng.uniform(0.5, 1.5)),
            )
        )
    return Trajectory(frames=tuple(frames), duration_s=duration)


class TestRot6D:
    def test_gram_schmidt_hand_computed(self):
        # a=(1,1,0), b=(0,1,0) worked by hand:
        # c1 = (1,1,0)/sqrt2
        # b - (b.c1)c1 = (0,1,0) - (1/2,1/2,0) = (-1/2,1/2,0) -> c2 = (-1,1,0)/sqrt2
        # c3 = c1 x c2 = (0,0,1)
        s = 1.0 / math.sqrt(2.0)
        expected = np.array([[s, -s, 0.0], [s, s, 0.0], [0.0, 0.0, 1.0]])
        got = rot6d_to_matrix(Rot6D(a=np.array([1.0, 1.0, 0.0]), b=np.array([0.0, 1.0, 0.0])))
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_identity(self):
        np.testing.assert_allclose(rot6d_to_matrix(Rot6D.identity()), np.eye(3), atol=0)

    def test_round_trip_property_10k(self):
        rng = np.random.default_rng(7)
        rotations = [random_rotation(rng) for _ in range(10_000)]
        start = time.monotonic()
        results = [rot6d_to_matrix(matrix_to_rot6d(r)) for r in rotations]
        elapsed = time.monotonic() - start
        worst = 0.0
        for r, back in zip(rotations, results):
            worst = max(worst, float(np.max(np.abs(back - r))))
            assert abs(np.linalg.det(back) - 1.0) < 1e-12
        assert worst < 1e-9, f"worst round-trip error {worst:.3e}"
        assert elapsed < 1.0, f"10k round trips took {elapsed:.2f}s"

    def test_unnormalized_input_recovers_rotation(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            r = random_rotation(rng)
            noisy = Rot6D(a=3.7 * r[:, 0], b=0.2 * r[:, 1] + 0.05 * r[:, 0])
            np.testing.assert_allclose(rot6d_to_matrix(noisy), r, atol=1e-9)

    def test_degenerate_zero_vector(self):
        with pytest.raises(DegenerateRotation):
            rot6d_to_matrix(Rot6D(a=np.zeros(3), b=np.array([0.0, 1.0, 0.0])))

    def test_degenerate_parallel(self):
        with pytest.raises(DegenerateRotation):
            rot6d_to_matrix(Rot6D(a=np.array([1.0, 0.0, 0.0]), b=np.array([2.0, 0.0, 0.0])))

    def test_matrix_to_rot6d_rejects_nonrotation(self):
        with pytest.raises(InvalidRotation):
            matrix_to_rot6d(np.diag([1.0, 1.0, 2.0]))
        with pytest.raises(InvalidRotation):
            matrix_to_rot6d(np.diag([1.0, 1.0, -1.0]))  # det -1

    def test_orthonormalize_tolerant_fallbacks(self):
        r = orthonormalize_rot6d(np.zeros(6))
        m = rot6d_to_matrix(r)
        assert np.allclose(m.T @ m, np.eye(3), atol=1e-12)
        r2 = orthonormalize_rot6d(np.array([1.0, 0.0, 0.0, 2.0, 0.0, 0.0]))
        m2 = rot6d_to_matrix(r2)
        assert np.allclose(m2.T @ m2, np.eye(3), atol=1e-12)


class TestRotationHelpers:
    def test_axis_angle_yaw90(self):
        expected = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
        np.testing.assert_allclose(axis_angle_matrix([0, 1, 0], math.pi / 2), expected, atol=1e-12)

    def test_geodesic_angle_known(self):
        assert geodesic_angle(np.eye(3), yaw(0.3)) == pytest.approx(0.3, abs=1e-12)
        assert geodesic_angle(yaw(0.2), yaw(1.0)) == pytest.approx(0.8, abs=1e-12)

    def test_quat_round_trip(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            r = random_rotation(rng)
            q = matrix_to_quat(r)
            assert q[0] >= 0.0
            from camtraj.geometry import quat_to_matrix

            np.testing.assert_allclose(quat_to_matrix(q), r, atol=1e-12)

    def test_slerp_midpoint_is_half_angle(self):
        got = slerp_matrix(np.eye(3), yaw(math.pi / 2), 0.5)
        np.testing.assert_allclose(got, yaw(math.pi / 4), atol=1e-12)

    def test_slerp_endpoints_and_geodesic_rate(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            r0, r1 = random_rotation(rng), random_rotation(rng)
            np.testing.assert_allclose(slerp_matrix(r0, r1, 0.0), r0, atol=1e-12)
            np.testing.assert_allclose(slerp_matrix(r0, r1, 1.0), r1, atol=1e-12)
            total = geodesic_angle(r0, r1)
            for t in (0.25, 0.5, 0.75):
                mid = slerp_matrix(r0, r1, t)
                assert geodesic_angle(r0, mid) == pytest.approx(t * total, abs=1e-9)


class TestTrajectory:
    def test_validation(self):
        f = CameraFrame.canonical()
        with pytest.raises(ValueError):
            Trajectory(frames=(f,), duration_s=1.0)
        with pytest.raises(ValueError):
            Trajectory(frames=(f, f), duration_s=0.0)
        with pytest.raises(ValueError):
            CameraFrame(rot=Rot6D.identity(), trans=np.zeros(3), focal=0.0)

    def test_frame_velocities_hand_computed(self):
        # 3 frames over 4s -> dt = 2s. Move +2x then +4x; yaw 0 -> 0.5 -> 0.5 rad.
        frames = (
            CameraFrame(rot=matrix_to_rot6d(yaw(0.0)), trans=np.array([0.0, 0.0, 0.0])),
            CameraFrame(rot=matrix_to_rot6d(yaw(0.5)), trans=np.array([2.0, 0.0, 0.0])),
            CameraFrame(rot=matrix_to_rot6d(yaw(0.5)), trans=np.array([6.0, 0.0, 0.0])),
        )
        vels = frame_velocities(Trajectory(frames=frames, duration_s=4.0))
        assert len(vels) == 2
        np.testing.assert_allclose(vels[0][0], [1.0, 0.0, 0.0], atol=1e-12)
        assert vels[0][1] == pytest.approx(0.25, abs=1e-12)
        np.testing.assert_allclose(vels[1][0], [2.0, 0.0, 0.0], atol=1e-12)
        assert vels[1][1] == pytest.approx(0.0, abs=1e-12)

    def test_mse_matches_naive_loop(self):
        rng = np.random.default_rng(13)
        a, b = make_traj(rng), make_traj(rng)
        t_mse, r_mse = trajectory_mse(a, b)
        # oracle: naive per-frame accumulation
        t_sum, r_sum = 0.0, 0.0
        for fa, fb in zip(a.frames, b.frames):
            t_sum += sum((float(x) - float(y)) ** 2 for x, y in zip(fa.trans, fb.trans))
            ang = math.degrees(geodesic_angle(fa.rotation_matrix(), fb.rotation_matrix()))
            r_sum += ang**2
        assert t_mse == pytest.approx(t_sum / len(a), abs=1e-12)
        assert r_mse == pytest.approx(r_sum / len(a), abs=1e-12)
        assert trajectory_mse(a, a) == (0.0, 0.0)

    def test_mse_length_mismatch(self):
        rng = np.random.default_rng(14)
        with pytest.raises(LengthMismatch):
            trajectory_mse(make_traj(rng, m=4), make_traj(rng, m=5))

    def test_json_round_trip(self):
        rng = np.random.default_rng(15)
        traj = make_traj(rng)
        assert trajectory_from_dict(trajectory_to_dict(traj)) == traj


class TestSimilarity:
    def test_apply_matches_matrix_oracle(self):
        # scale 2, yaw 90, translate (1,0,0); check against direct arithmetic
        s = SimilarityTransform(
            rotation=matrix_to_rot6d(yaw(math.pi / 2)),
            translation=np.array([1.0, 0.0, 0.0]),
            scale=2.0,
        )
        rng = np.random.default_rng(16)
        traj = make_traj(rng, m=4)
        out = apply_similarity(traj, s)
        rs = yaw(math.pi / 2)
        for fin, fout in zip(traj.frames, out.frames):
            np.testing.assert_allclose(fout.trans, 2.0 * (rs @ fin.trans) + [1, 0, 0], atol=1e-12)
            np.testing.assert_allclose(
                fout.rotation_matrix(), rs @ fin.rotation_matrix(), atol=1e-12
            )
            assert fout.focal == fin.focal
        assert out.duration_s == traj.duration_s

    def test_point_oracle(self):
        s = SimilarityTransform(
            rotation=matrix_to_rot6d(yaw(math.pi / 2)),
            translation=np.array([1.0, 0.0, 0.0]),
            scale=2.0,
        )
        # R_y(90) @ (0,0,-1) = (-1,0,0); * 2 -> (-2,0,0); + (1,0,0) -> (-1,0,0)
        np.testing.assert_allclose(s.apply_point([0.0, 0.0, -1.0]), [-1.0, 0.0, 0.0], atol=1e-12)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            s = SimilarityTransform(
                rotation=matrix_to_rot6d(random_rotation(rng)),
                translation=rng.normal(size=3),
                scale=float(rng.uniform(0.3, 3.0)),
            )
            p = rng.normal(size=3)
            np.testing.assert_allclose(s.inverse().apply_point(s.apply_point(p)), p, atol=1e-9)
        traj = make_traj(rng)
        back = apply_similarity(apply_similarity(traj, s), s.inverse())
        t_mse, r_mse = trajectory_mse(back, traj)
        assert t_mse < 1e-18 and r_mse < 1e-12

    def test_align_endpoint_exact(self):
        rng = np.random.default_rng(18)
        for which in ("start", "end"):
            for _ in range(50):
                traj = make_traj(rng)
                target = CameraFrame(
                    rot=matrix_to_rot6d(random_rotation(rng)), trans=rng.normal(size=3)
                )
                moved = align_endpoint(traj, target, which)
                f = moved.start if which == "start" else moved.end
                assert np.max(np.abs(f.trans - target.trans)) < 1e-9
                assert geodesic_angle(f.rotation_matrix(), target.rotation_matrix()) < 1e-9
                # rigid: inter-frame distances preserved
                for i in range(len(traj) - 1):
                    d0 = np.linalg.norm(traj.frames[i + 1].trans - traj.frames[i].trans)
                    d1 = np.linalg.norm(moved.frames[i + 1].trans - moved.frames[i].trans)
                    assert d1 == pytest.approx(d0, abs=1e-9)


class TestResample:
    def test_endpoints_exact(self):
        rng = np.random.default_rng(19)
        traj = make_traj(rng, m=7)
        for m_new in (2, 5, 7, 13, 120):
            out = resample(traj, m_new)
            assert len(out) == m_new
            assert out.duration_s == traj.duration_s
            assert out.start == traj.start
            assert out.end == traj.end

    def test_linear_path_is_reproduced(self):
        # straight-line translation with fixed rotation: any resampling lies on the line
        frames = tuple(
            CameraFrame(rot=Rot6D.identity(), trans=np.array([i / 3.0, 0.0, 0.0]), focal=1.0)
            for i in range(4)
        )
        traj = Trajectory(frames=frames, duration_s=3.0)
        out = resample(traj, 7)
        for j, f in enumerate(out.frames):
            np.testing.assert_allclose(f.trans, [j / 6.0, 0.0, 0.0], atol=1e-12)

    def test_rotation_midpoint_slerped(self):
        frames = (
            CameraFrame(rot=matrix_to_rot6d(yaw(0.0)), trans=np.zeros(3)),
            CameraFrame(rot=matrix_to_rot6d(yaw(math.pi / 2)), trans=np.zeros(3)),
        )
        out = resample(Trajectory(frames=frames, duration_s=1.0), 3)
        np.testing.assert_allclose(out.frames[1].rotation_matrix(), yaw(math.pi / 4), atol=1e-12)

    def test_invalid_target(self):
        rng = np.random.default_rng(20)
        with pytest.raises(ValueError):
            resample(make_traj(rng), 1)


class TestConcatenateAndExport:
    def test_concatenate_dedupes_junction(self):
        rng = np.random.default_rng(21)
        a = make_traj(rng, m=4, duration=2.0)
        b = align_endpoint(make_traj(rng, m=5, duration=3.0), a.end, "start")
        out = concatenate([a, b])
        assert len(out) == 4 + 5 - 1
        assert out.duration_s == pytest.approx(5.0)
        assert out.frames[3] == a.end

    def test_camera_path_export(self):
        frames = (
            CameraFrame(rot=Rot6D.identity(), trans=np.array([1.0, 2.0, 3.0]), focal=0.5),
            CameraFrame(rot=matrix_to_rot6d(yaw(0.3)), trans=np.zeros(3), focal=0.8),
        )
        d = camera_path_dict(Trajectory(frames=frames, duration_s=0.5))
        assert d["fps"] == pytest.approx(2.0)
        assert len(d["frames"]) == 2
        c2w = np.array(d["frames"][0]["c2w"]).reshape(4, 4)
        np.testing.assert_allclose(c2w[:3, :3], np.eye(3), atol=1e-12)
        np.testing.assert_allclose(c2w[:3, 3], [1.0, 2.0, 3.0], atol=1e-12)
        np.testing.assert_allclose(c2w[3], [0, 0, 0, 1], atol=0)
        # focal 0.5 -> half-width subtends atan(1) = 45 deg -> 90 deg FOV
        assert d["frames"][0]["fov_deg"] == pytest.approx(90.0, abs=1e-9)
