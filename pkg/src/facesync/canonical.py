"""Per-frame affine mapping of tracked landmarks into the canonical face.

The fit solves, over the stable-landmark subset, the linear least squares
problem min_R || [X 1] R - C ||_F with X the frame landmarks and C the
canonical coordinates, so R is 4x3 (three linear rows plus a translation
row). Applying R to all 478 homogeneous-augmented landmarks yields the
canonical-space mesh used downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import AllFramesDegenerate, DegenerateGeometry, EmptyStream

COND_LIMIT = 1e12


@dataclass(frozen=True)
class CanonicalFaceModel:
    points: np.ndarray      # (478, 3) metric space
    stable_ids: np.ndarray  # rigid subset used for the fit
    iris_ids: np.ndarray    # tracked iris landmarks
    version: int = 1

    def __post_init__(self):
        stable = set(self.stable_ids.tolist())
        iris = set(self.iris_ids.tolist())
        if stable & iris:
            raise ValueError("stable_ids and iris_ids must be disjoint")
        if not (stable | iris) <= set(range(len(self.points))):
            raise ValueError("landmark ids out of range")
        pts = self.points[self.stable_ids]
        centered = pts - pts.mean(axis=0)
        if len(pts) < 4 or np.linalg.matrix_rank(centered, tol=1e-9) < 3:
            raise ValueError("stable_ids needs >= 4 non-coplanar points")


@dataclass(frozen=True)
class AffinePose:
    """4x3 map from homogeneous frame coordinates to canonical space."""

    R: np.ndarray

    def __post_init__(self):
        if self.R.shape != (4, 3) or not np.all(np.isfinite(self.R)):
            raise ValueError("pose must be a finite 4x3 matrix")

    @property
    def flat(self):
        """Row-major 12-vector, the 'head' feature channels."""
        return self.R.reshape(-1)


def identity_pose():
    return AffinePose(R=np.vstack([np.eye(3), np.zeros(3)]))


@dataclass
class AlignedStream:
    """Canonical-space landmarks per frame, with poses and blendshapes."""

    subject_id: str
    video_id: str
    nominal_rate: float
    t: np.ndarray            # (n,)
    Y: np.ndarray            # (n, 478, 3) canonical-space landmarks
    poses: np.ndarray        # (n, 4, 3)
    blendshapes: np.ndarray  # (n, 52)
    valid: np.ndarray        # (n,) observed and non-degenerate
    unfilled_gaps: list

    def __len__(self):
        return len(self.t)


def load_canonical_model(path=None):
    """Load the packaged canonical face model, or one from ``path``."""
    if path is None:
        raw = resources.files("facesync.data").joinpath(
            "canonical_face_model.json").read_text()
        obj = json.loads(raw)
    else:
        with open(path) as f:
            obj = json.load(f)
    return CanonicalFaceModel(
        points=np.asarray(obj["points"], dtype=np.float64),
        stable_ids=np.asarray(obj["stable_ids"], dtype=np.intp),
        iris_ids=np.asarray(obj["iris_ids"], dtype=np.intp),
        version=int(obj.get("version", 1)),
    )


def _augment(landmarks):
    return np.concatenate([landmarks, np.ones((len(landmarks), 1))], axis=1)


def fit_affine(frame_landmarks, model):
    """Least-squares fit of the frame -> canonical affine pose.

    Solved by QR (via lstsq) rather than explicit normal equations for
    conditioning. Raises DegenerateGeometry when the stable design matrix is
    effectively rank-deficient (condition number above 1e12).
    """
    frame_landmarks = np.asarray(frame_landmarks, dtype=np.float64)
    X = _augment(frame_landmarks[model.stable_ids])
    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] <= 0 or s[0] / s[-1] > COND_LIMIT:
        raise DegenerateGeometry(
            f"stable landmark geometry is rank-deficient (cond ~ {s[0] / max(s[-1], 1e-300):.2e})")
    C = model.points[model.stable_ids]
    R, *_ = np.linalg.lstsq(X, C, rcond=None)
    return AffinePose(R=R)


def apply_affine(frame_landmarks, pose):
    """Y = [X 1] R applied to all 478 landmarks."""
    frame_landmarks = np.asarray(frame_landmarks, dtype=np.float64)
    return _augment(frame_landmarks) @ pose.R


def align_stream(stream, model):
    """Fit and apply the affine pose frame by frame.

    Degenerate frames are marked invalid and take the nearest previous valid
    pose (the first valid pose for a degenerate prefix).
    """
    n = len(stream)
    if n == 0:
        raise EmptyStream("cannot align an empty stream")
    poses = np.empty((n, 4, 3))
    ok = np.ones(n, dtype=bool)
    for i in range(n):
        try:
            poses[i] = fit_affine(stream.landmarks[i], model).R
        except DegenerateGeometry:
            ok[i] = False
    if not ok.any():
        raise AllFramesDegenerate(f"no frame of {stream.subject_id}/{stream.video_id} could be aligned")
    # forward-fill degenerate poses from the previous valid frame; backfill
    # a degenerate prefix from the first valid frame
    first_valid = int(np.argmax(ok))
    last = poses[first_valid]
    for i in range(n):
        if ok[i]:
            last = poses[i]
        else:
            poses[i] = last

    X = _augment(stream.landmarks.reshape(-1, 3)).reshape(n, 478, 4)
    Y = np.einsum("nlk,nkd->nld", X, poses)
    return AlignedStream(
        subject_id=stream.subject_id,
        video_id=stream.video_id,
        nominal_rate=stream.nominal_rate,
        t=stream.t.copy(),
        Y=Y,
        poses=poses,
        blendshapes=stream.blendshapes.copy(),
        valid=stream.valid & ok,
        unfilled_gaps=list(stream.unfilled_gaps),
    )


def iris_xy(aligned, model):
    """Canonical-space in-plane iris coordinates, the ISC input channels.

    Returns (n, 2 * n_iris) values ordered (x, y) per iris landmark, plus
    channel names.
    """
    pts = aligned.Y[:, model.iris_ids, :2]  # (n, n_iris, 2)
    names = []
    for lid in model.iris_ids.tolist():
        names += [f"iris{lid}_x", f"iris{lid}_y"]
    return pts.reshape(len(aligned), -1), names
