import numpy as np
import pytest

from facesync.canonical import (
    align_stream,
    apply_affine,
    fit_affine,
    identity_pose,
    iris_xy,
    load_canonical_model,
)
from facesync.errors import AllFramesDegenerate, DegenerateGeometry
from facesync.landmark_io import FrameStream


def make_stream(landmarks, rate=30.0):
    n = len(landmarks)
    return FrameStream(
        subject_id="s0", video_id="v0", nominal_rate=rate,
        t=np.arange(n) / rate, landmarks=np.asarray(landmarks, dtype=float),
        blendshapes=np.zeros((n, 52)), valid=np.ones(n, dtype=bool))


def random_rigid(rng, scale=0.02):
    """Random rotation+scale+translation mapping canonical -> frame coords."""
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    trans = rng.uniform(0.3, 0.7, 3)
    return scale * q, trans


class TestModel:
    def test_shapes(self, model):
        assert model.points.shape == (478, 3)
        assert set(model.stable_ids).isdisjoint(set(model.iris_ids))
        assert len(model.iris_ids) == 10

    def test_stable_set_well_conditioned(self, model):
        X = np.concatenate([model.points[model.stable_ids],
                            np.ones((len(model.stable_ids), 1))], axis=1)
        s = np.linalg.svd(X, compute_uv=False)
        assert s[0] / s[-1] < 1e4


class TestFitAffine:
    def test_identity_on_canonical_points(self, model):
        pose = fit_affine(model.points, model)
        Y = apply_affine(model.points, pose)
        assert np.abs(Y - model.points).max() < 1e-9

    def test_recovers_rigid_pose(self, model):
        rng = np.random.default_rng(1)
        for _ in range(20):
            A, b = random_rigid(rng)
            X = model.points @ A.T + b
            pose = fit_affine(X, model)
            Y = apply_affine(X, pose)
            assert np.abs(Y - model.points).max() < 1e-9

    def test_noise_residual_bounded(self, model):
        # unit-scale pose so the noise and the residual live in the same units
        rng = np.random.default_rng(2)
        A, b = random_rigid(rng, scale=1.0)
        X = model.points @ A.T + b + rng.normal(0, 1e-3, (478, 3))
        pose = fit_affine(X, model)
        resid = apply_affine(X, pose)[model.stable_ids] - model.points[model.stable_ids]
        assert np.sqrt((resid ** 2).mean()) < 3e-3

    def test_collinear_raises(self, model):
        X = np.zeros((478, 3))
        X[:, 0] = np.arange(478)  # all stable landmarks on one line
        with pytest.raises(DegenerateGeometry):
            fit_affine(X, model)

    def test_pose_flat_is_row_major(self, model):
        pose = fit_affine(model.points, model)
        assert np.array_equal(pose.flat, pose.R.reshape(-1))
        assert pose.flat.shape == (12,)


class TestAlignStream:
    def test_aligned_invariant_y_equals_xr(self, model):
        rng = np.random.default_rng(3)
        frames = []
        for _ in range(5):
            A, b = random_rigid(rng)
            frames.append(model.points @ A.T + b)
        aligned = align_stream(make_stream(frames), model)
        for i in range(5):
            X1 = np.concatenate([np.asarray(frames[i]), np.ones((478, 1))], axis=1)
            assert np.allclose(aligned.Y[i], X1 @ aligned.poses[i])

    def test_degenerate_frame_forward_filled(self, model):
        rng = np.random.default_rng(4)
        A, b = random_rigid(rng)
        good = model.points @ A.T + b
        bad = np.zeros((478, 3))
        bad[:, 0] = np.arange(478)
        aligned = align_stream(make_stream([good, bad, good]), model)
        assert aligned.valid.tolist() == [True, False, True]
        assert np.allclose(aligned.poses[1], aligned.poses[0])

    def test_degenerate_prefix_backfilled(self, model):
        rng = np.random.default_rng(5)
        A, b = random_rigid(rng)
        good = model.points @ A.T + b
        bad = np.zeros((478, 3))
        bad[:, 0] = np.arange(478)
        aligned = align_stream(make_stream([bad, good]), model)
        assert np.allclose(aligned.poses[0], aligned.poses[1])

    def test_all_degenerate_raises(self, model):
        bad = np.zeros((478, 3))
        bad[:, 0] = np.arange(478)
        with pytest.raises(AllFramesDegenerate):
            align_stream(make_stream([bad, bad]), model)

    def test_pose_invariance_of_canonical_coordinates(self, model):
        # the same face under two camera poses aligns to the same Y
        rng = np.random.default_rng(6)
        A1, b1 = random_rigid(rng)
        A2, b2 = random_rigid(rng)
        a1 = align_stream(make_stream([model.points @ A1.T + b1]), model)
        a2 = align_stream(make_stream([model.points @ A2.T + b2]), model)
        assert np.abs(a1.Y - a2.Y).max() < 1e-9


def test_iris_xy_channels(model):
    aligned = align_stream(make_stream([model.points, model.points]), model)
    values, names = iris_xy(aligned, model)
    assert values.shape == (2, 20)
    assert len(names) == 20
    assert names[0].endswith("_x") and names[1].endswith("_y")
    assert np.allclose(values[0].reshape(10, 2), model.points[model.iris_ids, :2])


def test_identity_pose():
    p = identity_pose()
    pts = np.random.default_rng(0).normal(size=(478, 3))
    assert np.allclose(apply_affine(pts, p), pts)
