import numpy as np
import pytest

from facesync.errors import (
    EmptyTargets,
    EmptyTrainSplit,
    LengthMismatch,
    NonFiniteLoss,
    UnstandardizedInput,
)
from facesync.features import (
    N_FEATURES,
    DatasetSplit,
    StandardizationStats,
    WindowSample,
)
from facesync.nn import ModelConfig
from facesync.training import (
    Adam,
    artifact_digest,
    baseline_mean,
    load_artifact,
    mse_grad,
    mse_loss,
    predict,
    save_artifact,
    train,
)

TINY = dict(architecture="hybrid", input_shape=(8, 8), conv_channels=(2, 3),
            lstm_hidden=4, dense_widths=(3,))


def make_samples(n, sids=("s0", "s1"), shape=(8, 8), seed=0, linear=True):
    """Windows whose target is a fixed linear functional of x (learnable)."""
    rng = np.random.default_rng(seed)
    w = np.random.default_rng(999).normal(size=shape)
    w /= np.abs(w).sum() * 2
    out = []
    for i in range(n):
        x = rng.normal(size=shape)
        y = float(np.clip(0.5 + (x * w).sum(), 0, 1)) if linear else rng.uniform()
        out.append(WindowSample(subject_id=sids[i % len(sids)], video_id="v0",
                                t_end=10.0 + i, x=x, y=y))
    return out


def make_split(n_train=50, n_val=10, seed=0):
    return DatasetSplit(train=make_samples(n_train, seed=seed),
                        val=make_samples(n_val, sids=("s2",), seed=seed + 1),
                        test=[])


class TestAdam:
    def test_single_step_matches_hand_computation(self):
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
        theta = np.array([0.3, -1.2], dtype=np.float64)
        grad = np.array([0.5, -2.0], dtype=np.float64)
        opt = Adam(2, lr=lr, beta1=b1, beta2=b2, eps=eps)
        opt.step(theta, grad)
        # first step: m_hat = g, v_hat = g^2
        expect = np.array([0.3, -1.2]) - lr * grad / (np.abs(grad) + eps)
        assert np.abs(theta - expect).max() < 1e-12

    def test_second_step_matches_hand_computation(self):
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
        theta = np.zeros(1)
        g1, g2 = np.array([1.0]), np.array([-0.5])
        opt = Adam(1, lr=lr, beta1=b1, beta2=b2, eps=eps)
        opt.step(theta, g1)
        opt.step(theta, g2)
        m = b1 * (1 - b1) * g1 + (1 - b1) * g2
        v = b2 * (1 - b2) * g1 ** 2 + (1 - b2) * g2 ** 2
        m_hat = m / (1 - b1 ** 2)
        v_hat = v / (1 - b2 ** 2)
        step1 = -lr * g1 / (np.abs(g1) + eps)
        expect = step1 - lr * m_hat / (np.sqrt(v_hat) + eps)
        assert np.abs(theta - expect).max() < 1e-12

    def test_converges_on_quadratic(self):
        theta = np.array([5.0, -3.0])
        opt = Adam(2, lr=0.1)
        for _ in range(500):
            opt.step(theta, 2 * theta)  # f = |theta|^2
        assert np.abs(theta).max() < 1e-3


class TestLosses:
    def test_mse_examples(self):
        assert mse_loss([0.0, 0.0], [1.0, 3.0]) == pytest.approx(5.0)
        assert mse_loss([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_mse_grad(self):
        g = mse_grad(np.array([1.0, 2.0]), np.array([0.0, 0.0]))
        assert np.allclose(g, [1.0, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mse_loss([1.0], [1.0, 2.0])


class TestTrainLoop:
    def small_train(self, seed=0, epochs=40):
        split = make_split(seed=7)
        from facesync.training import TrainConfig
        return train(split, ModelConfig(seed=seed, **TINY),
                     TrainConfig(epochs=epochs, batch_size=16, seed=seed)), split

    def test_overfits_small_set(self):
        from facesync.training import TrainConfig
        split = DatasetSplit(train=make_samples(50, seed=3), val=[], test=[])
        art = train(split, ModelConfig(seed=0, **TINY),
                    TrainConfig(epochs=300, batch_size=16,
                                learning_rate=3e-3, seed=0))
        losses = np.asarray(art.meta["train_losses"])
        assert losses[-1] < 1e-3
        # loss decreases in the aggregate (mini-batch noise aside)
        assert losses[-50:].mean() < 0.1 * losses[:50].mean()

    def test_best_epoch_selected_on_val(self):
        art, _ = self.small_train()
        vl = art.meta["val_losses"]
        assert art.meta["best_epoch"] == int(np.argmin(vl))

    def test_deterministic(self):
        a1, _ = self.small_train(seed=5, epochs=10)
        a2, _ = self.small_train(seed=5, epochs=10)
        assert artifact_digest(a1) == artifact_digest(a2)
        assert a1.meta["train_losses"] == a2.meta["train_losses"]

    def test_seed_changes_result(self):
        a1, _ = self.small_train(seed=1, epochs=5)
        a2, _ = self.small_train(seed=2, epochs=5)
        assert artifact_digest(a1) != artifact_digest(a2)

    def test_empty_train_raises(self):
        from facesync.training import TrainConfig
        with pytest.raises(EmptyTrainSplit):
            train(DatasetSplit(train=[], val=[], test=[]),
                  ModelConfig(**TINY), TrainConfig(epochs=1))

    def test_nonfinite_loss_raises(self):
        from facesync.training import TrainConfig
        split = make_split()
        with pytest.raises(NonFiniteLoss), np.errstate(all="ignore"):
            # an absurd learning rate overflows float32 within one epoch
            train(split, ModelConfig(seed=0, **TINY),
                  TrainConfig(epochs=3, learning_rate=1e20))


class TestPredictAndBaseline:
    def test_predict_rows(self):
        from facesync.training import TrainConfig
        split = make_split()
        art = train(split, ModelConfig(seed=0, **TINY),
                    TrainConfig(epochs=3, seed=0))
        rows = predict(art, split.val)
        assert len(rows) == len(split.val)
        r = rows[0]
        assert (r.subject_id, r.video_id, r.t_end) == ("s2", "v0", 10.0)
        assert r.y_true == split.val[0].y

    def test_clamp01(self):
        from facesync.training import TrainConfig
        split = make_split()
        art = train(split, ModelConfig(seed=0, **TINY), TrainConfig(epochs=2))
        rows = predict(art, split.val, clamp01=True)
        assert all(0.0 <= r.y_pred <= 1.0 for r in rows)

    def test_fingerprint_guard(self):
        from facesync.training import TrainConfig
        split = make_split()
        art = train(split, ModelConfig(seed=0, **TINY), TrainConfig(epochs=2))
        foreign = StandardizationStats(mean=np.ones(N_FEATURES),
                                       std=np.ones(N_FEATURES))
        with pytest.raises(UnstandardizedInput):
            predict(art, split.val, stats_fingerprint=foreign.fingerprint)
        rows = predict(art, split.val,
                       stats_fingerprint=art.stats.fingerprint)
        assert len(rows) == len(split.val)

    def test_baseline_mean(self):
        base = baseline_mean([0.2, 0.4, 0.6])
        rows = base.predict(make_samples(4))
        assert all(r.y_pred == pytest.approx(0.4) for r in rows)

    def test_baseline_empty_raises(self):
        with pytest.raises(EmptyTargets):
            baseline_mean([])


class TestArtifactFile:
    def test_round_trip_bit_exact(self, tmp_path):
        from facesync.training import TrainConfig
        split = make_split()
        art = train(split, ModelConfig(seed=0, **TINY),
                    TrainConfig(epochs=3, seed=0))
        path = tmp_path / "model.fsyn"
        save_artifact(art, path)
        loaded = load_artifact(path)
        assert artifact_digest(loaded) == artifact_digest(art)
        r1 = predict(art, split.val)
        r2 = predict(loaded, split.val)
        assert all(a.y_pred == b.y_pred for a, b in zip(r1, r2))
        assert loaded.meta["best_epoch"] == art.meta["best_epoch"]

    def test_magic_check(self, tmp_path):
        path = tmp_path / "junk.fsyn"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValueError):
            load_artifact(path)

    def test_save_is_deterministic(self, tmp_path):
        from facesync.training import TrainConfig
        split = make_split()
        art = train(split, ModelConfig(seed=0, **TINY),
                    TrainConfig(epochs=2, seed=0))
        p1, p2 = tmp_path / "a.fsyn", tmp_path / "b.fsyn"
        save_artifact(art, p1)
        save_artifact(art, p2)
        assert p1.read_bytes() == p2.read_bytes()
