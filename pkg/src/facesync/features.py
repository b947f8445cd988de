"""Predictor assembly, target joining, standardization and splits.

The 64 predictor channels are, in fixed order: channels 0-51 the tracker
blendshapes (canonical name order) and channels 52-63 the 4x3 affine pose
matrix flattened row-major. Both pass through the same low-pass resampler
as the iris channels so feature windows and ISC windows share one grid.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import (
    EmptySplit,
    EmptyStream,
    GridMismatch,
    OverlappingSubjectLists,
    UnmatchedSubjectVideo,
)
from .resample import DEFAULT_CUTOFF, DEFAULT_OUT_RATE, WindowSpec, lowpass_resample, sliding_windows

N_FEATURES = 64
STD_FLOOR = 1e-8
DATASET_FORMAT_VERSION = 1


def blendshape_names():
    raw = resources.files("facesync.data").joinpath("blendshape_names.json").read_text()
    return json.loads(raw)["names"]


def feature_channel_names():
    names = list(blendshape_names())
    names += [f"pose_r{i}{j}" for i in range(4) for j in range(3)]
    return names


@dataclass
class FeatureSeries:
    subject_id: str
    video_id: str
    series: "UniformSeries"  # 64 channels

    def __post_init__(self):
        if self.series.values.shape[1] != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} channels, got {self.series.values.shape[1]}")


@dataclass
class WindowSample:
    subject_id: str
    video_id: str
    t_end: float
    x: np.ndarray  # (win_len, 64)
    y: float


@dataclass
class StandardizationStats:
    mean: np.ndarray  # (64,)
    std: np.ndarray   # (64,) floored at STD_FLOOR

    @property
    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mean, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.std, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    @classmethod
    def identity(cls, n_channels=N_FEATURES):
        return cls(mean=np.zeros(n_channels), std=np.ones(n_channels))


@dataclass
class DatasetSplit:
    train: list
    val: list
    test: list
    descriptor: dict = field(default_factory=dict)


def assemble_features(aligned, out_rate=DEFAULT_OUT_RATE, cutoff=DEFAULT_CUTOFF):
    """Resample blendshapes + flattened pose onto the shared 4 Hz grid."""
    if len(aligned) == 0:
        raise EmptyStream("cannot assemble features from an empty stream")
    bs = np.clip(aligned.blendshapes, 0.0, 1.0)
    raw = np.concatenate([bs, aligned.poses.reshape(len(aligned), 12)], axis=1)
    series = lowpass_resample(
        aligned.t, raw, out_rate=out_rate, cutoff=cutoff,
        observed=aligned.valid, in_rate=aligned.nominal_rate,
        channel_names=feature_channel_names())
    return FeatureSeries(subject_id=aligned.subject_id,
                         video_id=aligned.video_id, series=series)


def build_dataset(features, targets, spec=WindowSpec()):
    """Join feature windows with ISC targets into WindowSamples.

    One sample per valid target window whose feature window is also fully
    valid. Returns (samples, drop_report).
    """
    samples = []
    dropped = {"invalid_target": 0, "invalid_features": 0}
    trace_index = {(tr.subject_id, tr.video_id): tr for tr in targets}
    for fs in features:
        key = (fs.subject_id, fs.video_id)
        tr = trace_index.get(key)
        if tr is None:
            raise UnmatchedSubjectVideo(f"no ISC trace for {key}")
        wins = sliding_windows(fs.series, spec)
        if len(wins) != len(tr.times):
            raise GridMismatch(
                f"{key}: {len(wins)} feature windows vs {len(tr.times)} target windows")
        if np.max(np.abs(wins.t_end - tr.times)) > 1e-6:
            raise GridMismatch(f"{key}: feature and target window times differ")
        for k in range(len(wins)):
            if not tr.valid[k]:
                dropped["invalid_target"] += 1
                continue
            if not wins.valid[k]:
                dropped["invalid_features"] += 1
                continue
            samples.append(WindowSample(
                subject_id=fs.subject_id, video_id=fs.video_id,
                t_end=float(wins.t_end[k]),
                x=np.array(wins.blocks[k], dtype=np.float64),
                y=float(tr.values[k])))
    return samples, dropped


def standardize(samples, stats=None):
    """Z-score per channel. Stats come from the given samples (training
    split) when ``stats`` is None; passing stats never recomputes them."""
    if stats is None:
        if not samples:
            raise EmptySplit("cannot compute standardization stats from no samples")
        stacked = np.concatenate([s.x for s in samples], axis=0)
        mean = stacked.mean(axis=0)
        std = np.maximum(stacked.std(axis=0), STD_FLOOR)
        stats = StandardizationStats(mean=mean, std=std)
    out = [
        WindowSample(subject_id=s.subject_id, video_id=s.video_id,
                     t_end=s.t_end, x=(s.x - stats.mean) / stats.std, y=s.y)
        for s in samples
    ]
    return out, stats


def split_by_subject(samples, train_subjects, val_subjects, test_subjects):
    train_s, val_s, test_s = set(train_subjects), set(val_subjects), set(test_subjects)
    if (train_s & val_s) or (train_s & test_s) or (val_s & test_s):
        raise OverlappingSubjectLists("subject lists must be disjoint")
    split = DatasetSplit(
        train=[s for s in samples if s.subject_id in train_s],
        val=[s for s in samples if s.subject_id in val_s],
        test=[s for s in samples if s.subject_id in test_s],
        descriptor={"mode": "by_subject", "train": sorted(train_s),
                    "val": sorted(val_s), "test": sorted(test_s)})
    if not split.train or not split.test:
        raise EmptySplit("train or test split is empty")
    return split


def split_by_subject_counts(samples, n_val, n_test, seed):
    """Seeded random partition of the subject set into train/val/test."""
    subjects = sorted({s.subject_id for s in samples})
    rng = np.random.default_rng(seed)
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    test = order[:n_test]
    val = order[n_test:n_test + n_val]
    train = order[n_test + n_val:]
    split = split_by_subject(samples, train, val, test)
    split.descriptor.update({"mode": "by_subject_counts", "seed": int(seed)})
    return split


def split_by_time(samples, test_fraction, purge_s=10.0, val_fraction=0.0,
                  length_s=10.0):
    """Hold out the final ``test_fraction`` of each video's timeline.

    Windows whose span crosses a split boundary within the purge margin are
    dropped, so no held-out window overlaps any train window in time.
    ``length_s`` is the window length the samples were cut with.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    by_video = {}
    for s in samples:
        by_video.setdefault(s.video_id, []).append(s)
    split = DatasetSplit(train=[], val=[], test=[], descriptor={
        "mode": "by_time", "test_fraction": test_fraction,
        "val_fraction": val_fraction, "purge_s": purge_s})
    for _vid, group in sorted(by_video.items()):
        t_min = min(s.t_end for s in group)
        t_max = max(s.t_end for s in group)
        start0 = t_min - length_s  # cuts live on the window-start axis
        span = t_max - start0
        test_cut = start0 + span * (1 - test_fraction)
        val_cut = test_cut - span * val_fraction
        for s in group:
            w_start = s.t_end - length_s
            if w_start >= test_cut:
                split.test.append(s)
            elif s.t_end > test_cut - purge_s:
                continue  # purged at the test boundary
            elif val_fraction > 0 and w_start >= val_cut:
                split.val.append(s)
            elif val_fraction == 0 or s.t_end <= val_cut - purge_s:
                split.train.append(s)
    if not split.train or not split.test:
        raise EmptySplit("by-time split produced an empty train or test set")
    return split


# --- persistence -----------------------------------------------------------

def save_dataset(split, stats, out_dir, window_spec=None, extra=None):
    """Persist a DatasetSplit as manifest.json + binary blocks per split.

    x blocks are row-major little-endian float32 of shape
    (n_samples, win_len, 64); y blocks are float32 (n_samples,). A CSV index
    carries (subject_id, video_id, t_end) per row.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "endianness": "little",
        "dtype": "float32",
        "n_channels": N_FEATURES,
        "channel_names": feature_channel_names(),
        "split_descriptor": split.descriptor,
        "standardization": {"mean": stats.mean.tolist(), "std": stats.std.tolist()}
        if stats is not None else None,
        "splits": {},
    }
    if window_spec is not None:
        manifest["window_spec"] = {"length_s": window_spec.length_s,
                                   "step_s": window_spec.step_s}
    if extra:
        manifest.update(extra)
    for name in ("train", "val", "test"):
        rows = getattr(split, name)
        win_len = rows[0].x.shape[0] if rows else 0
        x = np.stack([r.x for r in rows]).astype("<f4") if rows else np.zeros((0, 0, N_FEATURES), "<f4")
        y = np.array([r.y for r in rows], dtype="<f4")
        with open(os.path.join(out_dir, f"{name}_x.f32"), "wb") as f:
            f.write(x.tobytes())
        with open(os.path.join(out_dir, f"{name}_y.f32"), "wb") as f:
            f.write(y.tobytes())
        with open(os.path.join(out_dir, f"{name}_index.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["subject_id", "video_id", "t_end"])
            for r in rows:
                w.writerow([r.subject_id, r.video_id, repr(r.t_end)])
        manifest["splits"][name] = {"n_samples": len(rows), "win_len": win_len}
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)


def load_dataset(in_dir):
    """Inverse of save_dataset; returns (DatasetSplit, stats or None)."""
    import os

    with open(os.path.join(in_dir, "manifest.json")) as f:
        manifest = json.load(f)
    splits = {}
    for name in ("train", "val", "test"):
        meta = manifest["splits"][name]
        n, win_len = meta["n_samples"], meta["win_len"]
        x = np.frombuffer(open(os.path.join(in_dir, f"{name}_x.f32"), "rb").read(),
                          dtype="<f4").reshape(n, win_len, manifest["n_channels"]) if n else np.zeros((0, 0, N_FEATURES))
        y = np.frombuffer(open(os.path.join(in_dir, f"{name}_y.f32"), "rb").read(), dtype="<f4")
        rows = []
        with open(os.path.join(in_dir, f"{name}_index.csv"), newline="") as f:
            rdr = csv.DictReader(f)
            for i, rec in enumerate(rdr):
                rows.append(WindowSample(
                    subject_id=rec["subject_id"], video_id=rec["video_id"],
                    t_end=float(rec["t_end"]),
                    x=np.array(x[i], dtype=np.float64), y=float(y[i])))
        splits[name] = rows
    stats = None
    if manifest.get("standardization"):
        stats = StandardizationStats(
            mean=np.asarray(manifest["standardization"]["mean"], dtype=np.float64),
            std=np.asarray(manifest["standardization"]["std"], dtype=np.float64))
    split = DatasetSplit(train=splits["train"], val=splits["val"],
                         test=splits["test"],
                         descriptor=manifest.get("split_descriptor", {}))
    return split, stats
