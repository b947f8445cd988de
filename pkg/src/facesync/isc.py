"""Time-resolved inter-subject correlation of iris movements.

For every sliding window and every channel, all pairwise Pearson
correlations between subjects are computed, negatives are clamped to zero,
and each subject's ISC is the clamped pairwise mean over the other subjects,
averaged across channels. The result is a per-subject attention trace on the
window grid (1 Hz for the default 10s/1s spec).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, ShapeMismatch, TooFewSubjects
from .resample import WindowSpec, sliding_windows

VAR_FLOOR = 1e-12


@dataclass
class Cohort:
    """Subjects watching one video, on a shared uniform sampling grid."""

    video_id: str
    subject_ids: list
    series: list  # UniformSeries per subject, same rate/t0/channels

    def __post_init__(self):
        if len(self.subject_ids) < 2:
            raise TooFewSubjects(
                f"ISC needs >= 2 subjects, got {len(self.subject_ids)}")
        if len(self.series) != len(self.subject_ids):
            raise ShapeMismatch("one series per subject required")
        ref = self.series[0]
        for s in self.series[1:]:
            if abs(s.rate - ref.rate) > 1e-9 or abs(s.t0 - ref.t0) > 1e-9:
                raise ShapeMismatch("all subjects must share the sampling grid")
            if s.values.shape[1] != ref.values.shape[1]:
                raise ShapeMismatch("all subjects must share the channel layout")


@dataclass
class IscTrace:
    subject_id: str
    video_id: str
    times: np.ndarray   # window END times
    values: np.ndarray  # ISC in [0, 1]
    valid: np.ndarray


def pearson(a, b):
    """Pearson r; 0 by convention when either input is (near-)constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"shapes {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise LengthMismatch("need at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    va = da @ da
    vb = db @ db
    if va / len(a) < VAR_FLOOR or vb / len(b) < VAR_FLOOR:
        return 0.0
    return float(np.clip((da @ db) / np.sqrt(va * vb), -1.0, 1.0))


def window_isc(blocks):
    """Per-subject ISC for one window.

    ``blocks`` is (n_subjects, n_samples, n_channels). Pairwise correlations
    are clamped at zero BEFORE averaging over partners and channels, which
    guarantees values in [0, 1].
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    if blocks.ndim != 3:
        raise ShapeMismatch(f"expected (subjects, samples, channels), got {blocks.shape}")
    S, n, C = blocks.shape
    if S < 2:
        raise TooFewSubjects(f"ISC needs >= 2 subjects, got {S}")

    x = blocks.transpose(2, 0, 1)                   # (C, S, n)
    x = x - x.mean(axis=2, keepdims=True)
    var = np.einsum("csn,csn->cs", x, x) / n
    norm = np.sqrt(np.maximum(var * n, 1e-300))
    z = x / norm[:, :, None]
    r = np.einsum("cin,cjn->cij", z, z)             # (C, S, S)
    degenerate = var < VAR_FLOOR                    # near-constant windows
    r = np.where(degenerate[:, :, None], 0.0, r)
    r = np.where(degenerate[:, None, :], 0.0, r)
    np.clip(r, 0.0, 1.0, out=r)                     # negative clamping
    idx = np.arange(S)
    r[:, idx, idx] = 0.0                            # exclude self-correlation
    per_channel = r.sum(axis=2) / (S - 1)           # (C, S)
    return per_channel.mean(axis=0)


def time_resolved_isc(cohort, spec=WindowSpec()):
    """Sliding-window ISC traces, one per subject.

    A window is invalid for everyone when any subject's window contains
    invalid (gap-filled or unobserved) samples.
    """
    wins = [sliding_windows(s, spec) for s in cohort.series]
    counts = {len(w) for w in wins}
    if len(counts) != 1:
        raise ShapeMismatch(f"subjects produced differing window counts {sorted(counts)}")
    K = counts.pop()
    valid = np.logical_and.reduce([w.valid for w in wins])
    values = np.zeros((len(cohort.subject_ids), K))
    for k in range(K):
        values[:, k] = window_isc(np.stack([w.blocks[k] for w in wins]))
    t_end = wins[0].t_end
    return [
        IscTrace(subject_id=sid, video_id=cohort.video_id, times=t_end.copy(),
                 values=values[i], valid=valid.copy())
        for i, sid in enumerate(cohort.subject_ids)
    ]
