"""Walkthrough: from raw frame streams to time-resolved attention traces.

We plant a known attention schedule in a small synthetic cohort, push the
streams through alignment -> iris extraction -> low-pass resampling -> ISC,
and check that the recovered traces track the planted schedule.

Run:  python3 demos/01_isc_from_synthetic_cohort.py
"""

import numpy as np

from facesync.canonical import align_stream, iris_xy, load_canonical_model
from facesync.isc import Cohort, time_resolved_isc
from facesync.resample import WindowSpec, lowpass_resample
from facesync.synthetic import SynthConfig, generate_cohort, schedule_weight

# --- 1. a cohort with a planted mixed attention schedule --------------------

cfg = SynthConfig(n_subjects=5, duration_s=120.0, frame_rate=20.0,
                  schedule="mixed", seed=42)
model = load_canonical_model()
streams, schedules = generate_cohort(cfg, model)
print(f"generated {len(streams)} subjects x {cfg.duration_s:.0f}s "
      f"at {cfg.frame_rate:.0f} fps")

# --- 2. canonical alignment and iris channels --------------------------------

# Each frame's landmarks are mapped into the canonical face via a
# least-squares affine fit on the stable (rigid) landmark subset; the iris
# x/y coordinates in that space are the gaze proxies ISC consumes.
series = []
aligned = []
for s in streams:
    a = align_stream(s, model)
    aligned.append(a)
    iris, names = iris_xy(a, model)
    series.append(lowpass_resample(a.t, iris, out_rate=4.0, cutoff=2.0,
                                   observed=a.valid, in_rate=a.nominal_rate,
                                   channel_names=names))
print(f"iris channels per subject: {series[0].values.shape[1]} "
      f"at {series[0].rate:.0f} Hz")

# --- 3. time-resolved ISC -----------------------------------------------------

spec = WindowSpec(length_s=10.0, step_s=1.0)
cohort = Cohort(video_id=cfg.video_id,
                subject_ids=[a.subject_id for a in aligned], series=series)
traces = time_resolved_isc(cohort, spec)
print(f"{len(traces[0].times)} windows of {spec.length_s:.0f}s "
      f"stepped by {spec.step_s:.0f}s\n")

# --- 4. does the trace recover the planted schedule? --------------------------

print(f"{'subject':8s} {'mean ISC':>9s} {'attentive':>10s} "
      f"{'distracted':>11s} {'corr(w)':>8s}")
for tr in traces:
    # attention weight at window centres, ignoring ramp regions
    w = schedule_weight(schedules[tr.subject_id], tr.times - spec.length_s / 2)
    plateau = tr.valid & ((w > 0.9) | (w < 0.1))
    att = tr.values[plateau & (w > 0.9)].mean()
    dis = tr.values[plateau & (w < 0.1)].mean()
    r = np.corrcoef(tr.values[plateau], w[plateau])[0, 1]
    print(f"{tr.subject_id:8s} {tr.values[tr.valid].mean():9.3f} "
          f"{att:10.3f} {dis:11.3f} {r:8.3f}")

print("\nISC sits high inside attentive segments and collapses in "
      "distracted ones; the window-level correlation with the planted "
      "schedule is the signal the regressor will learn from.")
