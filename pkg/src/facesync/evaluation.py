"""Per-subject metrics, baseline comparison, and the feature-suppression study.

MAE and R^2 are computed within each subject and then averaged across
subjects; the R^2 denominator uses the subject's own evaluated-set target
mean. Suppression replaces a channel group's raw values with the training
mean (zero in standardized space) and measures the per-subject MAE change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
from scipy import special

from .errors import (
    LengthMismatch,
    SubjectMismatch,
    TooFewSamples,
    UnknownChannel,
)
from .features import N_FEATURES, WindowSample
from .training import predict


@dataclass
class SubjectMetrics:
    subject_id: str
    mae: float
    r2: float  # nan when the subject's targets have zero variance
    n_samples: int


@dataclass
class TTestResult:
    t: float
    p: float
    df: int
    zero_variance: bool = False


@dataclass
class ComparisonReport:
    per_subject: list          # (subject_id, model_mae, baseline_mae)
    model_mae_mean: float
    model_mae_sd: float
    baseline_mae_mean: float
    baseline_mae_sd: float
    percent_change: float
    ttest: TTestResult

    def as_dict(self):
        return {
            "per_subject": [
                {"subject_id": s, "model_mae": m, "baseline_mae": b}
                for s, m, b in self.per_subject],
            "model_mae": {"mean": self.model_mae_mean, "sd": self.model_mae_sd},
            "baseline_mae": {"mean": self.baseline_mae_mean, "sd": self.baseline_mae_sd},
            "percent_change": self.percent_change,
            "t": self.ttest.t, "p": self.ttest.p, "df": self.ttest.df,
        }


@dataclass
class SuppressionGroupResult:
    group: str
    per_subject_pct_dmae: dict  # subject_id -> % change in MAE
    mean_pct_dmae: float
    ttest: TTestResult


@dataclass
class SuppressionReport:
    groups: list = field(default_factory=list)

    def as_dict(self):
        return {
            g.group: {
                "per_subject_pct_dmae": g.per_subject_pct_dmae,
                "mean_pct_dmae": g.mean_pct_dmae,
                "t": g.ttest.t, "p": g.ttest.p, "df": g.ttest.df,
            }
            for g in self.groups
        }


def _group_rows(rows):
    by_subject = {}
    for r in rows:
        by_subject.setdefault(r.subject_id, []).append(r)
    return by_subject


def subject_metrics(rows):
    """Per-subject MAE and R^2 over prediction rows."""
    out = []
    for sid, rs in sorted(_group_rows(rows).items()):
        if len(rs) < 2:
            raise TooFewSamples(f"subject {sid} has {len(rs)} rows, need >= 2")
        y = np.array([r.y_true for r in rs])
        p = np.array([r.y_pred for r in rs])
        mae = float(np.abs(y - p).mean())
        ss_tot = float(((y - y.mean()) ** 2).sum())
        if ss_tot <= 0:
            r2 = float("nan")
        else:
            r2 = 1.0 - float(((y - p) ** 2).sum()) / ss_tot
        out.append(SubjectMetrics(subject_id=sid, mae=mae, r2=r2, n_samples=len(rs)))
    return out


def t_sf(t, df):
    """Two-tailed p for a t statistic via the regularized incomplete beta."""
    t = float(t)
    df = float(df)
    x = df / (df + t * t)
    return float(special.betainc(df / 2.0, 0.5, x))


def paired_t_test(a, b):
    """Paired t-test on differences a - b; two-tailed p."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    n = len(a)
    if n < 2:
        raise LengthMismatch("need at least 2 pairs")
    d = a - b
    sd = d.std(ddof=1)
    df = n - 1
    if sd == 0:
        if np.all(d == 0):
            return TTestResult(t=0.0, p=1.0, df=df, zero_variance=True)
        t = np.inf if d.mean() > 0 else -np.inf
        return TTestResult(t=float(t), p=0.0, df=df, zero_variance=True)
    t = d.mean() / (sd / np.sqrt(n))
    return TTestResult(t=float(t), p=t_sf(t, df), df=df)


def compare_to_baseline(model_rows, baseline_rows):
    """Per-subject MAE of model vs baseline, with a paired t-test."""
    mk = {(r.subject_id, r.video_id, r.t_end) for r in model_rows}
    bk = {(r.subject_id, r.video_id, r.t_end) for r in baseline_rows}
    if mk != bk:
        raise SubjectMismatch("model and baseline predictions cover different rows")
    m_metrics = {m.subject_id: m for m in subject_metrics(model_rows)}
    b_metrics = {m.subject_id: m for m in subject_metrics(baseline_rows)}
    subjects = sorted(m_metrics)
    m_mae = np.array([m_metrics[s].mae for s in subjects])
    b_mae = np.array([b_metrics[s].mae for s in subjects])
    tt = paired_t_test(m_mae, b_mae)
    return ComparisonReport(
        per_subject=[(s, float(m), float(b)) for s, m, b in zip(subjects, m_mae, b_mae)],
        model_mae_mean=float(m_mae.mean()), model_mae_sd=float(m_mae.std(ddof=1)) if len(subjects) > 1 else 0.0,
        baseline_mae_mean=float(b_mae.mean()), baseline_mae_sd=float(b_mae.std(ddof=1)) if len(subjects) > 1 else 0.0,
        percent_change=float((m_mae.mean() - b_mae.mean()) / b_mae.mean() * 100.0),
        ttest=tt)


def load_feature_groups(path=None):
    """Named channel-index groups for the suppression study."""
    if path is None:
        raw = resources.files("facesync.data").joinpath("feature_groups.json").read_text()
        obj = json.loads(raw)
    else:
        with open(path) as f:
            obj = json.load(f)
    return {k: list(v) for k, v in obj["groups"].items()}


def suppress_channels(samples, channels, stats):
    """Replace the given raw channels with the training mean (the value that
    standardizes to zero). Idempotent."""
    for c in channels:
        if not 0 <= c < N_FEATURES:
            raise UnknownChannel(f"channel index {c} out of range")
    out = []
    for s in samples:
        x = s.x.copy()
        if channels:
            x[:, channels] = stats.mean[channels]
        out.append(WindowSample(subject_id=s.subject_id, video_id=s.video_id,
                                t_end=s.t_end, x=x, y=s.y))
    return out


def suppression_study(artifact, samples, groups=None):
    """Re-run prediction with each feature group muted; report %MAE change.

    The paired t-test compares each group's per-subject MAE against the
    unsuppressed run ("none").
    """
    if groups is None:
        groups = load_feature_groups()
    base_rows = predict(artifact, samples)
    base_mae = {m.subject_id: m.mae for m in subject_metrics(base_rows)}
    subjects = sorted(base_mae)
    report = SuppressionReport()
    for name in sorted(groups):
        chans = groups[name]
        rows = predict(artifact, suppress_channels(samples, chans, artifact.stats)) \
            if chans else base_rows
        mae = {m.subject_id: m.mae for m in subject_metrics(rows)}
        pct = {s: (mae[s] - base_mae[s]) / base_mae[s] * 100.0 for s in subjects}
        vals = np.array([mae[s] for s in subjects])
        base_vals = np.array([base_mae[s] for s in subjects])
        if name == "none" or not chans:
            tt = TTestResult(t=0.0, p=1.0, df=len(subjects) - 1, zero_variance=True)
        else:
            tt = paired_t_test(vals, base_vals)
        report.groups.append(SuppressionGroupResult(
            group=name, per_subject_pct_dmae=pct,
            mean_pct_dmae=float(np.mean(list(pct.values()))), ttest=tt))
    return report
