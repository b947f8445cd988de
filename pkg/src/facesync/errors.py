"""Exception hierarchy shared across the pipeline.

Every error carries a stable machine-readable ``code`` so the CLI can emit
module-qualified error lines without string matching.
"""


class FaceSyncError(Exception):
    """Base class for all pipeline errors."""

    code = "facesync.error"


# --- landmark_io ---------------------------------------------------------

class MalformedRecord(FaceSyncError):
    code = "landmark_io.malformed_record"

    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: malformed record{': ' + reason if reason else ''}")


class NonMonotonicTimestamp(FaceSyncError):
    code = "landmark_io.non_monotonic_timestamp"

    def __init__(self, line_no, t):
        self.line_no = line_no
        super().__init__(f"line {line_no}: timestamp {t} not strictly increasing")


class WrongArity(FaceSyncError):
    code = "landmark_io.wrong_arity"

    def __init__(self, line_no, what, got, expected):
        self.line_no = line_no
        super().__init__(f"line {line_no}: expected {expected} {what}, got {got}")


class EmptyStream(FaceSyncError):
    code = "landmark_io.empty_stream"


# --- canonical_alignment --------------------------------------------------

class DegenerateGeometry(FaceSyncError):
    code = "canonical.degenerate_geometry"


class AllFramesDegenerate(FaceSyncError):
    code = "canonical.all_frames_degenerate"


# --- signal_processing ----------------------------------------------------

class TooShort(FaceSyncError):
    code = "signal.too_short"


class BadCutoff(FaceSyncError):
    code = "signal.bad_cutoff"


# --- isc_engine -----------------------------------------------------------

class LengthMismatch(FaceSyncError):
    code = "isc.length_mismatch"


class ShapeMismatch(FaceSyncError):
    code = "isc.shape_mismatch"


class TooFewSubjects(FaceSyncError):
    code = "isc.too_few_subjects"


# --- feature_dataset ------------------------------------------------------

class UnmatchedSubjectVideo(FaceSyncError):
    code = "dataset.unmatched_subject_video"


class GridMismatch(FaceSyncError):
    code = "dataset.grid_mismatch"


class OverlappingSubjectLists(FaceSyncError):
    code = "dataset.overlapping_subject_lists"


class EmptySplit(FaceSyncError):
    code = "dataset.empty_split"


# --- attention_model ------------------------------------------------------

class UnstandardizedInput(FaceSyncError):
    code = "model.unstandardized_input"


class EmptyTrainSplit(FaceSyncError):
    code = "model.empty_train_split"


class NonFiniteLoss(FaceSyncError):
    code = "model.non_finite_loss"


class EmptyTargets(FaceSyncError):
    code = "model.empty_targets"


# --- evaluation -----------------------------------------------------------

class TooFewSamples(FaceSyncError):
    code = "evaluation.too_few_samples"


class SubjectMismatch(FaceSyncError):
    code = "evaluation.subject_mismatch"


class UnknownChannel(FaceSyncError):
    code = "evaluation.unknown_channel"


# --- synthetic_cohort -----------------------------------------------------

class BadConfig(FaceSyncError):
    code = "synthetic.bad_config"
