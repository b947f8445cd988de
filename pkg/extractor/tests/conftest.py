from importlib import resources

import cv2
import numpy as np
import pytest


@pytest.fixture(scope="session")
def sample_clip():
    return str(resources.files("faceextract").joinpath("data/sample_clip.avi"))


def write_clip(path, frames, fps=15.0):
    h, w = frames[0].shape[:2]
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"),
                             fps, (w, h))
    assert writer.isOpened()
    for frame in frames:
        writer.write(frame)
    writer.release()


@pytest.fixture()
def faceless_clip(tmp_path):
    """30 frames of near-black background: no detectable face anywhere."""
    path = tmp_path / "faceless.avi"
    write_clip(path, [np.full((96, 96, 3), 15, np.uint8)] * 30)
    return str(path)


@pytest.fixture()
def garbage_file(tmp_path):
    path = tmp_path / "not_a_video.avi"
    path.write_bytes(b"this is not a video container")
    return str(path)
