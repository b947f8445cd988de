"""Pluggable per-frame face landmark backends.

A backend maps one BGR frame to a :class:`FaceObservation` (478 landmarks in
normalized image coordinates plus 52 blendshape activations) or ``None``
when no face is visible. :class:`MediaPipeBackend` wraps the off-the-shelf
tracker when the ``mediapipe`` package is installed; the dependency-free
:class:`TemplateBackend` detects a schematic bright-ellipse face (as in the
bundled sample clip) and projects a fixed landmark template onto it, which
is enough to exercise the full format contract deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import BackendUnavailable

N_LANDMARKS = 478
N_BLENDSHAPES = 52


@dataclass
class FaceObservation:
    landmarks: np.ndarray    # (478, 3), x/y normalized to [0,1], z relative
    blendshapes: np.ndarray  # (52,) activations in [0,1]

    def __post_init__(self):
        self.landmarks = np.asarray(self.landmarks, dtype=np.float64)
        self.blendshapes = np.asarray(self.blendshapes, dtype=np.float64)
        if self.landmarks.shape != (N_LANDMARKS, 3):
            raise ValueError(f"landmarks shape {self.landmarks.shape}")
        if self.blendshapes.shape != (N_BLENDSHAPES,):
            raise ValueError(f"blendshapes shape {self.blendshapes.shape}")


def landmark_template():
    """Fixed 478-point face template on the front half of an ellipsoid.

    Points follow a golden-angle spiral, so the cloud is deterministic,
    roughly uniform, and well-conditioned for downstream affine fits.
    Coordinates span about [-1, 1] and are scaled by the detected face size.
    """
    k = np.arange(N_LANDMARKS, dtype=np.float64)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    # spiral over the front hemisphere: z in [0, 1), azimuth by golden angle
    zs = k / N_LANDMARKS
    r = np.sqrt(1.0 - zs ** 2)
    theta = golden * k
    pts = np.stack([r * np.cos(theta),         # x: left-right
                    r * np.sin(theta) * 1.3,   # y: faces are taller than wide
                    0.8 * zs], axis=1)         # z: depth toward the camera
    return pts


class TemplateBackend:
    """Detect a bright elliptical face blob and fit the fixed template.

    Detection thresholds the grayscale frame, takes image moments of the
    largest connected component, and accepts it as a face when it covers
    enough of the frame. Two eye-activity channels are derived from the
    darkness of the detected eye regions; the remaining blendshapes sit at
    a constant resting activation.
    """

    MIN_AREA_FRAC = 0.02   # smallest acceptable blob, fraction of the frame
    THRESHOLD = 90         # grayscale face/background separation
    RESTING = 0.1          # baseline blendshape activation
    EYE_CHANNELS = (9, 10)  # eyeBlinkLeft / eyeBlinkRight in tracker order

    def __init__(self):
        self._template = landmark_template()

    def detect(self, frame):
        gray = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
        h, w = gray.shape
        mask = (gray > self.THRESHOLD).astype(np.uint8)
        n_labels, labels, stats, centroids = cv2.connectedComponentsWithStats(mask)
        if n_labels < 2:
            return None
        biggest = 1 + int(np.argmax(stats[1:, cv2.CC_STAT_AREA]))
        area = stats[biggest, cv2.CC_STAT_AREA]
        if area < self.MIN_AREA_FRAC * h * w:
            return None
        cx, cy = centroids[biggest]
        radius = np.sqrt(area / np.pi)

        scale = radius / w
        lm = self._template * scale
        lm[:, 0] += cx / w
        lm[:, 1] += cy / h

        bs = np.full(N_BLENDSHAPES, self.RESTING)
        for side, channel in zip((-1.0, 1.0), self.EYE_CHANNELS):
            ex = int(round(cx + side * 0.45 * radius))
            ey = int(round(cy - 0.25 * radius))
            patch = gray[max(ey - 2, 0):ey + 3, max(ex - 2, 0):ex + 3]
            if patch.size:
                # dark eye dot visible -> eye open -> low blink activation
                darkness = 1.0 - float(patch.min()) / 255.0
                bs[channel] = np.clip(1.0 - darkness, 0.0, 1.0)
        return FaceObservation(landmarks=lm, blendshapes=bs)


class MediaPipeBackend:
    """Adapter around the MediaPipe face landmarker task."""

    def __init__(self, model_asset_path=None):
        try:
            import mediapipe as mp
            from mediapipe.tasks.python import vision
        except ImportError as e:
            raise BackendUnavailable(
                "mediapipe is not installed; install the 'mediapipe' extra "
                "or use the template backend") from e
        self._mp = mp
        options = vision.FaceLandmarkerOptions(
            base_options=mp.tasks.BaseOptions(model_asset_path=model_asset_path),
            output_face_blendshapes=True,
            num_faces=1)
        self._landmarker = vision.FaceLandmarker.create_from_options(options)

    def detect(self, frame):
        mp = self._mp
        image = mp.Image(image_format=mp.ImageFormat.SRGB,
                         data=cv2.cvtColor(frame, cv2.COLOR_BGR2RGB))
        result = self._landmarker.detect(image)
        if not result.face_landmarks:
            return None
        lm = np.array([[p.x, p.y, p.z] for p in result.face_landmarks[0]])
        # the tracker emits a leading neutral category we do not keep
        bs = np.array([c.score for c in result.face_blendshapes[0]][-N_BLENDSHAPES:])
        return FaceObservation(landmarks=lm, blendshapes=np.clip(bs, 0.0, 1.0))


BACKENDS = {"template": TemplateBackend, "mediapipe": MediaPipeBackend}


def make_backend(name):
    if name not in BACKENDS:
        raise BackendUnavailable(f"unknown backend {name!r}; "
                                 f"choose from {sorted(BACKENDS)}")
    return BACKENDS[name]()
