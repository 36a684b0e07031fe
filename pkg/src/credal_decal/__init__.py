"""Credal sets from likelihood-bounded logit shifts of a trained classifier."""

from .core import (
    AlphaLevel,
    BoxCredalSet,
    CredalError,
    DecalibrationModel,
    DegenerateClass,
    EmptyBox,
    EmptyList,
    InvalidConfig,
    LabeledLogits,
    LengthMismatch,
    LogitMatrix,
    NotConverged,
    NotNormalized,
    OutOfRange,
    ParseError,
    ProbabilityInterval,
    ProbabilityVector,
    SchemaVersionMismatch,
    ShiftEndpoints,
    SingleClassData,
    SolverBudgetExceeded,
    SolverError,
    UncertaintyReport,
    UnknownAlpha,
    ValidationError,
    log_odds_one_vs_rest,
)
from .credal import (
    can_be_argmax,
    contains,
    is_nested,
    predict_box,
    predict_boxes,
    predict_intervals,
    tighten_reachable,
)
from .likelihood import (
    SolverConfig,
    delta_loglik,
    delta_loglik_1d,
    delta_loglik_grad,
    family_max_1d,
    fit,
    solve_endpoints,
    upper_bound_multivariate,
)
from .metrics import EvaluationSummary, SweepRow, auroc, coverage, efficiency, pareto_sweep
from .synth import SynthConfig, SynthData, generate
from .uncertainty import (
    eu_score,
    max_entropy,
    min_entropy,
    rank_by_uncertainty,
    shannon_entropy,
    uncertainty_report,
    zero_one_eu,
)

__version__ = "0.1.0"
