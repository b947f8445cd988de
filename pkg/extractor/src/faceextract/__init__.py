"""Video-to-frame-stream extractor for the facesync attention pipeline."""

from .backends import (
    FaceObservation,
    MediaPipeBackend,
    TemplateBackend,
    make_backend,
)
from .errors import (
    BackendUnavailable,
    BadJob,
    ExtractError,
    NoFaceFound,
    UnreadableVideo,
)
from .extract import ExtractionJob, extract

__version__ = "0.1.0"

__all__ = [
    "FaceObservation",
    "MediaPipeBackend",
    "TemplateBackend",
    "make_backend",
    "ExtractionJob",
    "extract",
    "ExtractError",
    "NoFaceFound",
    "UnreadableVideo",
    "BackendUnavailable",
    "BadJob",
    "__version__",
]
