"""Extractor error hierarchy with machine-readable codes."""


class ExtractError(Exception):
    """Base class; ``code`` feeds the CLI's machine-readable error line."""

    code = "extract.error"


class UnreadableVideo(ExtractError):
    """The container could not be opened or contains no decodable frames."""

    code = "extract.unreadable_video"


class NoFaceFound(ExtractError):
    """A face was detected in fewer than the required fraction of frames."""

    code = "extract.no_face_found"


class BackendUnavailable(ExtractError):
    """The requested landmark backend is not importable in this environment."""

    code = "extract.backend_unavailable"


class BadJob(ExtractError):
    """Invalid extraction job parameters (empty ids, unwritable output)."""

    code = "extract.bad_job"
