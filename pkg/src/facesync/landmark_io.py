"""Parsing, validation and gap-filling of per-subject frame streams.

A frame-stream file is UTF-8, one JSON object per line:
``{"t": <seconds>, "lm": [[x,y,z] x 478], "bs": [<float> x 52]}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyStream,
    MalformedRecord,
    NonMonotonicTimestamp,
    WrongArity,
)

N_LANDMARKS = 478
N_BLENDSHAPES = 52

# A gap is an inter-frame interval longer than this multiple of the nominal
# frame interval.
GAP_FACTOR = 1.5

# Blendshapes may stray outside [0,1] by tracker noise; beyond this they are
# counted as out-of-range (and clamped by clamp_blendshapes).
BLENDSHAPE_TOL = 1e-6


@dataclass
class FrameStream:
    """Ordered per-subject landmark/blendshape stream.

    Arrays are time-major: ``t`` (n,), ``landmarks`` (n, 478, 3),
    ``blendshapes`` (n, 52). ``valid`` is False on interpolated frames.
    ``unfilled_gaps`` lists (t_before, t_after) pairs of gaps that exceeded
    the fill threshold.
    """

    subject_id: str
    video_id: str
    nominal_rate: float
    t: np.ndarray
    landmarks: np.ndarray
    blendshapes: np.ndarray
    valid: np.ndarray
    unfilled_gaps: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)


@dataclass
class StreamReport:
    frame_count: int
    duration_s: float
    gap_count: int
    longest_gap_s: float
    out_of_range_blendshape_count: int
    dropped_frame_count: int

    def as_dict(self):
        return {
            "frame_count": self.frame_count,
            "duration_s": self.duration_s,
            "gap_count": self.gap_count,
            "longest_gap_s": self.longest_gap_s,
            "out_of_range_blendshape_count": self.out_of_range_blendshape_count,
            "dropped_frame_count": self.dropped_frame_count,
        }


def parse_frame_stream(source, subject_id, video_id, nominal_rate=None):
    """Parse a line-delimited frame stream.

    ``source`` is a binary/text file-like object or an iterable of lines.
    Raises on the first malformed line rather than skipping it. When
    ``nominal_rate`` is omitted it is inferred from the median inter-frame
    interval (requires >= 2 frames).
    """
    times = []
    lms = []
    bss = []
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as e:
            raise MalformedRecord(line_no, str(e)) from None
        if not isinstance(rec, dict) or not {"t", "lm", "bs"} <= set(rec):
            raise MalformedRecord(line_no, "missing t/lm/bs keys")
        t = rec["t"]
        if not isinstance(t, (int, float)) or not math.isfinite(t) or t < 0:
            raise MalformedRecord(line_no, f"bad timestamp {t!r}")
        lm = rec["lm"]
        if len(lm) != N_LANDMARKS:
            raise WrongArity(line_no, "landmarks", len(lm), N_LANDMARKS)
        bs = rec["bs"]
        if len(bs) != N_BLENDSHAPES:
            raise WrongArity(line_no, "blendshapes", len(bs), N_BLENDSHAPES)
        lm_arr = np.asarray(lm, dtype=np.float64)
        if lm_arr.shape != (N_LANDMARKS, 3):
            raise MalformedRecord(line_no, "landmark entries must be [x,y,z]")
        bs_arr = np.asarray(bs, dtype=np.float64)
        if not np.all(np.isfinite(lm_arr)) or not np.all(np.isfinite(bs_arr)):
            raise MalformedRecord(line_no, "non-finite coordinate")
        if times and t <= times[-1]:
            raise NonMonotonicTimestamp(line_no, t)
        times.append(float(t))
        lms.append(lm_arr)
        bss.append(bs_arr)

    n = len(times)
    t_arr = np.asarray(times, dtype=np.float64)
    if nominal_rate is None:
        if n < 2:
            raise MalformedRecord(n, "cannot infer nominal rate from < 2 frames")
        dt = float(np.median(np.diff(t_arr)))
        nominal_rate = round(1.0 / dt, 3)
    return FrameStream(
        subject_id=subject_id,
        video_id=video_id,
        nominal_rate=float(nominal_rate),
        t=t_arr,
        landmarks=np.asarray(lms, dtype=np.float64).reshape(n, N_LANDMARKS, 3),
        blendshapes=np.asarray(bss, dtype=np.float64).reshape(n, N_BLENDSHAPES),
        valid=np.ones(n, dtype=bool),
    )


def serialize_frame_stream(stream, sink):
    """Write the observed frames of ``stream`` in the line format.

    Uses shortest round-trip float repr so parse(serialize(parse(x)))
    reproduces the arrays bit-identically.
    """
    for i in range(len(stream)):
        rec = {
            "t": float(stream.t[i]),
            "lm": stream.landmarks[i].tolist(),
            "bs": stream.blendshapes[i].tolist(),
        }
        sink.write(json.dumps(rec, separators=(",", ":")) + "\n")


def validate_stream(stream):
    """Diagnostic report: gaps, duration, out-of-range blendshapes."""
    n = len(stream)
    duration = float(stream.t[-1] - stream.t[0]) if n else 0.0
    gap_threshold = GAP_FACTOR / stream.nominal_rate
    if n >= 2:
        dts = np.diff(stream.t)
        gaps = dts[dts > gap_threshold]
        gap_count = int(len(gaps))
        longest = float(gaps.max()) if gap_count else 0.0
    else:
        gap_count, longest = 0, 0.0
    oor = int(np.sum((stream.blendshapes < -BLENDSHAPE_TOL)
                     | (stream.blendshapes > 1.0 + BLENDSHAPE_TOL)))
    return StreamReport(
        frame_count=n,
        duration_s=duration,
        gap_count=gap_count,
        longest_gap_s=longest,
        out_of_range_blendshape_count=oor,
        dropped_frame_count=0,
    )


def clamp_blendshapes(stream):
    """Clamp blendshapes into [0,1] in place (tracker noise is non-fatal)."""
    np.clip(stream.blendshapes, 0.0, 1.0, out=stream.blendshapes)
    return stream


def fill_gaps(stream, max_gap_s=1.0):
    """Fill gaps up to ``max_gap_s`` by linear interpolation on the nominal grid.

    Interpolated frames get ``valid = False``. Longer gaps are left in place
    and recorded in ``unfilled_gaps``. Idempotent; observed frames are never
    modified.
    """
    if max_gap_s <= 0:
        raise ValueError("max_gap_s must be > 0")
    n = len(stream)
    if n == 0:
        raise EmptyStream("cannot fill gaps of an empty stream")
    dt_nominal = 1.0 / stream.nominal_rate
    gap_threshold = GAP_FACTOR * dt_nominal

    t_out = [stream.t[:1]]
    lm_out = [stream.landmarks[:1]]
    bs_out = [stream.blendshapes[:1]]
    valid_out = [stream.valid[:1]]
    unfilled = []
    for i in range(1, n):
        dt = stream.t[i] - stream.t[i - 1]
        if gap_threshold < dt <= max_gap_s:
            # new samples on the nominal grid strictly inside the gap
            k = np.arange(1, int(np.floor((dt - 0.5 * dt_nominal) / dt_nominal)) + 1)
            if len(k):
                tt = stream.t[i - 1] + k * dt_nominal
                w = ((tt - stream.t[i - 1]) / dt)[:, None]
                lm_a = stream.landmarks[i - 1].reshape(1, -1)
                lm_b = stream.landmarks[i].reshape(1, -1)
                t_out.append(tt)
                lm_out.append(((1 - w) * lm_a + w * lm_b).reshape(len(k), N_LANDMARKS, 3))
                bs_out.append((1 - w) * stream.blendshapes[i - 1] + w * stream.blendshapes[i])
                valid_out.append(np.zeros(len(k), dtype=bool))
        elif dt > max_gap_s:
            unfilled.append((float(stream.t[i - 1]), float(stream.t[i])))
        t_out.append(stream.t[i:i + 1])
        lm_out.append(stream.landmarks[i:i + 1])
        bs_out.append(stream.blendshapes[i:i + 1])
        valid_out.append(stream.valid[i:i + 1])

    return FrameStream(
        subject_id=stream.subject_id,
        video_id=stream.video_id,
        nominal_rate=stream.nominal_rate,
        t=np.concatenate(t_out),
        landmarks=np.concatenate(lm_out),
        blendshapes=np.concatenate(bs_out),
        valid=np.concatenate(valid_out),
        unfilled_gaps=unfilled,
    )


def stream_path_ids(path):
    """Split ``<subject_id>__<video_id>.jsonl`` into its ids."""
    import os

    stem = os.path.basename(path)
    if stem.endswith(".jsonl"):
        stem = stem[: -len(".jsonl")]
    if "__" not in stem:
        raise ValueError(f"cannot split subject/video ids from {path!r}")
    subject_id, video_id = stem.split("__", 1)
    return subject_id, video_id
