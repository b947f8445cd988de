"""Run a landmark backend over a video and emit the frame-stream format.

One JSON object per processed frame:
``{"t": <seconds>, "lm": [[x,y,z] x 478], "bs": [<float> x 52]}``.
Frames with no detected face are omitted; the downstream consumer's gap
handling takes over. Timestamps come from the container's presentation
clock, not the frame index, so variable-rate recordings stay aligned with
the stimulus.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import cv2

from .backends import TemplateBackend
from .errors import BadJob, NoFaceFound, UnreadableVideo

MIN_COVERAGE = 0.5


@dataclass
class ExtractionJob:
    video_path: str
    subject_id: str
    video_id: str
    out_path: str

    def __post_init__(self):
        if not self.subject_id or not self.video_id:
            raise BadJob("subject_id and video_id must be non-empty")
        out_dir = os.path.dirname(os.path.abspath(self.out_path))
        if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK):
            raise BadJob(f"output directory {out_dir!r} is not writable")


def _frames_with_pts(video_path):
    """Yield (presentation_time_s, frame) for every decodable frame."""
    cap = cv2.VideoCapture(video_path)
    if not cap.isOpened():
        raise UnreadableVideo(f"cannot open {video_path!r}")
    try:
        fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
        index = 0
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            pts_ms = cap.get(cv2.CAP_PROP_POS_MSEC)
            if pts_ms <= 0 and index > 0 and fps > 0:
                pts_ms = index * 1000.0 / fps  # container gave no clock
            yield pts_ms / 1000.0, frame
            index += 1
        if index == 0:
            raise UnreadableVideo(f"no decodable frames in {video_path!r}")
    finally:
        cap.release()


def extract(job, backend=None):
    """Process the job's video and write its frame-stream file.

    Returns a summary dict: frame totals, detected-frame coverage, and the
    output path. Raises :class:`NoFaceFound` when fewer than half of the
    frames contain a detectable face (the file is still not written then).
    """
    if backend is None:
        backend = TemplateBackend()

    records = []
    total = 0
    last_t = None
    for t, frame in _frames_with_pts(job.video_path):
        total += 1
        obs = backend.detect(frame)
        if obs is None:
            continue
        if last_t is not None and t <= last_t:
            continue  # drop duplicated container timestamps
        last_t = t
        records.append({"t": round(t, 6),
                        "lm": [[round(float(v), 6) for v in p]
                               for p in obs.landmarks],
                        "bs": [round(float(v), 6) for v in obs.blendshapes]})

    coverage = len(records) / total if total else 0.0
    if coverage < MIN_COVERAGE:
        raise NoFaceFound(
            f"face detected in {len(records)}/{total} frames "
            f"({coverage:.0%}); need >= {MIN_COVERAGE:.0%}")

    with open(job.out_path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return {
        "video": job.video_path,
        "subject_id": job.subject_id,
        "video_id": job.video_id,
        "out": job.out_path,
        "frames_total": total,
        "frames_detected": len(records),
        "coverage": coverage,
    }
