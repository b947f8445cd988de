import numpy as np
import pytest

from facesync.canonical import load_canonical_model
from facesync.synthetic import SynthConfig, generate_cohort


@pytest.fixture(scope="session")
def model():
    return load_canonical_model()


@pytest.fixture(scope="session")
def small_cohort(model):
    """4 subjects, 60 s at 20 fps, mixed schedule — shared by fast tests."""
    cfg = SynthConfig(n_subjects=4, duration_s=60.0, frame_rate=20.0,
                      schedule="mixed", seed=7)
    streams, schedules = generate_cohort(cfg, model)
    return cfg, streams, schedules


def make_stream_lines(t, landmarks, blendshapes):
    """Serialize raw arrays to frame-stream JSONL lines."""
    import json

    lines = []
    for i in range(len(t)):
        lines.append(json.dumps({
            "t": float(t[i]),
            "lm": np.asarray(landmarks[i]).tolist(),
            "bs": np.asarray(blendshapes[i]).tolist(),
        }))
    return lines
