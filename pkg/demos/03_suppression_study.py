"""Walkthrough: which facial channels does the model actually use?

Feature suppression replaces one named channel group with its training mean
(the value that standardizes to zero) and measures how much each subject's
prediction error grows. Groups the model relies on produce large, consistent
MAE increases; groups it ignores barely move.

Run:  python3 demos/03_suppression_study.py   (about a minute)
"""

from facesync.canonical import align_stream, iris_xy, load_canonical_model
from facesync.evaluation import load_feature_groups, suppression_study
from facesync.features import (
    assemble_features,
    build_dataset,
    split_by_subject_counts,
)
from facesync.isc import Cohort, time_resolved_isc
from facesync.nn import ModelConfig
from facesync.resample import WindowSpec, lowpass_resample
from facesync.synthetic import SynthConfig, generate_cohort
from facesync.training import TrainConfig, train

# --- 1. a cohort where only eye and head channels carry signal ----------------

cfg = SynthConfig(n_subjects=8, duration_s=120.0, frame_rate=20.0,
                  schedule="mixed", signal_groups=("eyes", "head"), seed=21)
model = load_canonical_model()
streams, _ = generate_cohort(cfg, model)
aligned = [align_stream(s, model) for s in streams]

spec = WindowSpec()
series = []
for a in aligned:
    iris, names = iris_xy(a, model)
    series.append(lowpass_resample(a.t, iris, 4.0, 2.0, observed=a.valid,
                                   in_rate=a.nominal_rate,
                                   channel_names=names))
traces = time_resolved_isc(Cohort(video_id=cfg.video_id,
                                  subject_ids=[a.subject_id for a in aligned],
                                  series=series), spec)
samples, _ = build_dataset([assemble_features(a) for a in aligned],
                           traces, spec)
split = split_by_subject_counts(samples, n_val=1, n_test=2, seed=0)

artifact = train(split, ModelConfig(architecture="hybrid", seed=0),
                 TrainConfig(epochs=30, batch_size=64, seed=0))

# --- 2. mute each channel group on held-out subjects ---------------------------

groups = load_feature_groups()
print("channel groups:",
      {k: len(v) for k, v in sorted(groups.items())}, "\n")
held_out = split.val + split.test
report = suppression_study(artifact, held_out, groups)

print(f"{'group':8s} {'mean ΔMAE %':>12s} {'p':>10s}")
for g in sorted(report.groups, key=lambda g: -g.mean_pct_dmae):
    print(f"{g.group:8s} {g.mean_pct_dmae:+12.2f} {g.ttest.p:10.4g}")

print("\nThe informative groups (eyes, head) dominate: muting them breaks "
      "the prediction, while the groups carrying no planted signal move "
      "held-out error only by distribution-shift noise — the ordering the "
      "ablation protocol is designed to surface. (The gap widens at the "
      "full 150-epoch protocol; this demo trains 30 epochs for speed.)")
