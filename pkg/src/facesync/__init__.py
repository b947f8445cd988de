"""facesync: attention estimation from webcam face dynamics.

Converts face landmark/blendshape streams into canonical-space features,
computes time-resolved inter-subject correlation of iris movements as the
attention target, and trains a windowed regressor that predicts it from a
single subject's face and head dynamics.
"""

__version__ = "0.1.0"

from .canonical import (
    AffinePose,
    AlignedStream,
    CanonicalFaceModel,
    align_stream,
    apply_affine,
    fit_affine,
    iris_xy,
    load_canonical_model,
)
from .features import (
    DatasetSplit,
    FeatureSeries,
    StandardizationStats,
    WindowSample,
    assemble_features,
    build_dataset,
    split_by_subject,
    split_by_subject_counts,
    split_by_time,
    standardize,
)
from .isc import Cohort, IscTrace, pearson, time_resolved_isc, window_isc
from .landmark_io import (
    FrameStream,
    StreamReport,
    fill_gaps,
    parse_frame_stream,
    serialize_frame_stream,
    validate_stream,
)
from .nn import ModelConfig, Network
from .resample import UniformSeries, WindowSpec, lowpass_resample, sliding_windows
from .synthetic import SynthConfig, generate_cohort, schedule_weight
from .training import (
    ModelArtifact,
    TrainConfig,
    baseline_mean,
    load_artifact,
    predict,
    save_artifact,
    train,
)
from .evaluation import (
    compare_to_baseline,
    paired_t_test,
    subject_metrics,
    suppression_study,
)
