"""Barrier-constrained token filtering for autoregressive text generation.

A safety filter built on a discrete-time control barrier function sits
between a next-token predictor and the token sampler: candidates whose
constraint value would fall faster than the barrier margin allows are masked
out, everything else passes through untouched, and the loop logs every
decision for later analysis.
"""

from .core import Text, Vocabulary, concat, normalize
from .constraint import (
    ClassScores,
    ClassifierConstraint,
    ConstraintFunction,
    NumericConstraint,
    make_classifier_constraint,
    make_numeric_constraint,
    make_remote_classifier_constraint,
    sentiment_margin,
)
from .errors import (
    CbfgenError,
    ConstraintEvaluationError,
    FilterStalled,
    NormalizationError,
    PredictorContractError,
    ProtocolError,
    RemoteError,
    SpecValidationError,
    TokenRangeError,
)
from .filters import (
    Candidate,
    CbfConfig,
    FilterDecision,
    blacklist_filter,
    cbf_filter,
    count_disallowed,
    nocontrol_filter,
)
from .pipeline import (
    BatchResult,
    FilterKind,
    GenerationConfig,
    StallPolicy,
    StepRecord,
    Termination,
    TrajectoryRecord,
    generate,
    run_batch,
    select_token,
)
from .predictor import (
    LogitSource,
    NgramPredictor,
    TablePredictor,
    make_ngram_predictor,
    make_remote_predictor,
    make_table_predictor,
    predict,
    softmax,
)
from .bridge_client import BridgeClient, RemotePredictor, RemoteScorer
from .analysis import (
    ExperimentReport,
    FilterReport,
    Histogram,
    HistogramSpec,
    attractor_histogram,
    fan_table,
    predicted_fan,
    summarize,
    trajectory_table,
)

__version__ = "0.1.0"

__all__ = [
    "BatchResult",
    "BridgeClient",
    "Candidate",
    "CbfConfig",
    "CbfgenError",
    "ClassScores",
    "ClassifierConstraint",
    "ConstraintEvaluationError",
    "ConstraintFunction",
    "ExperimentReport",
    "FilterDecision",
    "FilterKind",
    "FilterReport",
    "FilterStalled",
    "GenerationConfig",
    "Histogram",
    "HistogramSpec",
    "LogitSource",
    "NgramPredictor",
    "NormalizationError",
    "NumericConstraint",
    "PredictorContractError",
    "ProtocolError",
    "RemoteError",
    "RemotePredictor",
    "RemoteScorer",
    "SpecValidationError",
    "StallPolicy",
    "StepRecord",
    "TablePredictor",
    "Termination",
    "Text",
    "TokenRangeError",
    "TrajectoryRecord",
    "Vocabulary",
    "attractor_histogram",
    "blacklist_filter",
    "cbf_filter",
    "concat",
    "count_disallowed",
    "fan_table",
    "generate",
    "make_classifier_constraint",
    "make_ngram_predictor",
    "make_numeric_constraint",
    "make_remote_classifier_constraint",
    "make_remote_predictor",
    "make_table_predictor",
    "normalize",
    "predict",
    "predicted_fan",
    "run_batch",
    "select_token",
    "sentiment_margin",
    "softmax",
    "summarize",
    "trajectory_table",
]
