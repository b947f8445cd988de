"""Training loop, Adam optimizer, prediction, and model artifact files.

Training is deterministic for a fixed seed in single-threaded mode: data
order, weight init, and the optimizer all draw from seeded generators, and
``threads=1`` pins the BLAS pool so floating-point reductions are stable.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyTargets,
    EmptyTrainSplit,
    LengthMismatch,
    NonFiniteLoss,
    UnstandardizedInput,
)
from .features import StandardizationStats, standardize
from .nn import ModelConfig, Network

ARTIFACT_MAGIC = b"FSYN"
ARTIFACT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    patience: int = 0       # 0 disables early stopping
    dtype: str = "float32"  # training precision
    threads: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")

    def as_dict(self):
        return {k: getattr(self, k) for k in (
            "epochs", "batch_size", "learning_rate", "beta1", "beta2",
            "eps", "seed", "patience", "dtype", "threads")}


class Adam:
    """Adaptive moment estimation over a flat parameter vector."""

    def __init__(self, n_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 dtype=np.float64):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n_params, dtype=dtype)
        self.v = np.zeros(n_params, dtype=dtype)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        theta -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(theta.dtype)


def mse_loss(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise LengthMismatch(f"{pred.shape} vs {target.shape}")
    d = pred - target
    return float(d @ d / len(d))


def mse_grad(pred, target):
    return 2.0 * (np.asarray(pred) - np.asarray(target)) / len(pred)


@dataclass
class ModelArtifact:
    """Everything needed to reproduce predictions: config, parameters
    (little-endian float32), standardization stats, and training metadata."""

    config: ModelConfig
    theta: np.ndarray
    state: np.ndarray
    stats: StandardizationStats
    slices: dict
    meta: dict = field(default_factory=dict)

    def build_network(self, dtype=np.float32):
        net = Network(self.config, dtype=dtype)
        if net.n_params != len(self.theta):
            raise ValueError("artifact parameter count does not match config")
        net.store.theta[:] = self.theta
        net.store.state[:] = self.state
        return net


@dataclass
class PredictionRow:
    subject_id: str
    video_id: str
    t_end: float
    y_pred: float
    y_true: float


def _sample_matrix(samples, dtype):
    x = np.stack([s.x for s in samples]).astype(dtype)
    y = np.array([s.y for s in samples], dtype=np.float64)
    return x, y


def train(split, mconfig, tconfig, stats=None):
    """Adam over seeded shuffled mini-batches; the returned artifact holds
    the parameters from the epoch with minimum validation loss."""
    if not split.train:
        raise EmptyTrainSplit("training split is empty")
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=tconfig.threads if tconfig.threads > 0 else None):
        return _train_inner(split, mconfig, tconfig, stats)


def _train_inner(split, mconfig, tconfig, stats):
    dtype = np.dtype(tconfig.dtype).type
    train_std, stats = standardize(split.train, stats)
    val_std, _ = standardize(split.val, stats) if split.val else ([], None)

    x_train, y_train = _sample_matrix(train_std, dtype)
    if val_std:
        x_val, y_val = _sample_matrix(val_std, dtype)

    net = Network(mconfig, dtype=dtype)
    opt = Adam(net.n_params, lr=tconfig.learning_rate, beta1=tconfig.beta1,
               beta2=tconfig.beta2, eps=tconfig.eps, dtype=dtype)
    rng = np.random.default_rng(tconfig.seed)

    n = len(x_train)
    bs = min(tconfig.batch_size, n)
    train_losses, val_losses = [], []
    best = (np.inf, -1, None, None)
    for epoch in range(tconfig.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            xb, yb = x_train[idx], y_train[idx]
            pred = net.forward(xb, training=True)
            loss = mse_loss(pred, yb)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became non-finite at epoch {epoch}")
            epoch_loss += loss * len(idx)
            net.zero_grad()
            net.backward(mse_grad(pred, yb).astype(dtype))
            opt.step(net.store.theta, net.store.grad)
        train_losses.append(epoch_loss / n)

        if val_std:
            val_pred = _forward_batched(net, x_val)
            val_loss = mse_loss(val_pred, y_val)
        else:
            val_loss = train_losses[-1]  # no val split: select on train loss
        val_losses.append(val_loss)
        if val_loss < best[0]:
            best = (val_loss, epoch, net.store.theta.copy(), net.store.state.copy())
        if tconfig.patience and epoch - best[1] >= tconfig.patience:
            break

    theta = np.asarray(best[2], dtype="<f4")
    state = np.asarray(best[3], dtype="<f4")
    meta = {
        "epochs_run": len(train_losses),
        "best_epoch": best[1],
        "train_losses": [float(v) for v in train_losses],
        "val_losses": [float(v) for v in val_losses],
        "train_config": tconfig.as_dict(),
        "n_train": n,
        "n_val": len(val_std),
        "format_version": ARTIFACT_VERSION,
    }
    net_f32 = Network(mconfig, dtype=np.float32)
    return ModelArtifact(config=mconfig, theta=theta, state=state, stats=stats,
                         slices={k: [int(o), list(s), bool(tr)]
                                 for k, (o, s, tr) in net_f32.store.slices.items()},
                         meta=meta)


def _forward_batched(net, x, batch=512):
    out = np.empty(len(x), dtype=np.float64)
    for s in range(0, len(x), batch):
        out[s:s + batch] = net.forward(x[s:s + batch], training=False)
    return out


def predict(artifact, samples, clamp01=False, stats_fingerprint=None):
    """Standardize with the artifact's stored stats and run inference.

    ``stats_fingerprint``, when given, must match the artifact's; it guards
    against feeding windows standardized with foreign statistics.
    """
    if stats_fingerprint is not None and stats_fingerprint != artifact.stats.fingerprint:
        raise UnstandardizedInput(
            f"stats fingerprint {stats_fingerprint} does not match artifact "
            f"{artifact.stats.fingerprint}")
    if not samples:
        return []
    std, _ = standardize(samples, artifact.stats)
    net = artifact.build_network(dtype=np.float32)
    x = np.stack([s.x for s in std]).astype(np.float32)
    pred = _forward_batched(net, x)
    if clamp01:
        pred = np.clip(pred, 0.0, 1.0)
    return [
        PredictionRow(subject_id=s.subject_id, video_id=s.video_id,
                      t_end=s.t_end, y_pred=float(p), y_true=s.y)
        for s, p in zip(samples, pred)
    ]


class BaselineMean:
    """Naive constant predictor: the mean training-set target."""

    def __init__(self, mean):
        self.mean = float(mean)

    def predict(self, samples):
        return [
            PredictionRow(subject_id=s.subject_id, video_id=s.video_id,
                          t_end=s.t_end, y_pred=self.mean, y_true=s.y)
            for s in samples
        ]


def baseline_mean(train_targets):
    train_targets = np.asarray(train_targets, dtype=np.float64)
    if len(train_targets) == 0:
        raise EmptyTargets("baseline needs a non-empty training target set")
    return BaselineMean(train_targets.mean())


# --- artifact container file ------------------------------------------------

def save_artifact(artifact, path):
    header = {
        "format_version": ARTIFACT_VERSION,
        "config": artifact.config.as_dict(),
        "stats": {"mean": artifact.stats.mean.tolist(),
                  "std": artifact.stats.std.tolist()},
        "slices": artifact.slices,
        "n_theta": len(artifact.theta),
        "n_state": len(artifact.state),
        "meta": artifact.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(ARTIFACT_MAGIC)
        f.write(struct.pack("<II", ARTIFACT_VERSION, len(blob)))
        f.write(blob)
        f.write(np.ascontiguousarray(artifact.theta, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(artifact.state, dtype="<f4").tobytes())


def load_artifact(path):
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != ARTIFACT_MAGIC:
            raise ValueError(f"{path} is not a model artifact")
        version, hlen = struct.unpack("<II", f.read(8))
        if version != ARTIFACT_VERSION:
            raise ValueError(f"unsupported artifact version {version}")
        header = json.loads(f.read(hlen).decode("utf-8"))
        theta = np.frombuffer(f.read(4 * header["n_theta"]), dtype="<f4").copy()
        state = np.frombuffer(f.read(4 * header["n_state"]), dtype="<f4").copy()
    stats = StandardizationStats(
        mean=np.asarray(header["stats"]["mean"], dtype=np.float64),
        std=np.asarray(header["stats"]["std"], dtype=np.float64))
    return ModelArtifact(config=ModelConfig.from_dict(header["config"]),
                         theta=theta, state=state, stats=stats,
                         slices=header["slices"], meta=header["meta"])


def artifact_digest(artifact):
    h = hashlib.sha256()
    h.update(json.dumps(artifact.config.as_dict(), sort_keys=True).encode())
    h.update(artifact.theta.tobytes())
    h.update(artifact.state.tobytes())
    return h.hexdigest()
