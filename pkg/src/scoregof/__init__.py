"""Goodness-of-fit tests built on score processes with bootstrap calibration."""
from .bootstrap import (
    MOutOfN,
    NullDistribution,
    Parametric,
    Resampling,
    TestOutcome,
    decide,
    null_distribution,
    run_test,
)
from .directions import (
    ExpMixture,
    HaarWeighted,
    HermiteSet,
    IndicatorHalfline,
    IndicatorQuadrant,
    NormalScores,
    RankIndicator,
    TensorHaarWeighted,
    build_family,
    eval_direction,
)
from .estimator import ScoreTest
from .exceptions import DegenerateFitError, DomainError, IllPosedProjectionError
from .harness import (
    CopulaCorrelation,
    DriftConfig,
    FixedAlternative,
    GaussianMixture,
    LocalScaling,
    StudyConfig,
    StudyReport,
    drift_check,
    equivalence_check,
    read_report,
    run_power_study,
    run_size_study,
    sample_alternative,
    write_report,
)
from .model import (
    FittedNull,
    GaussianCopula,
    GaussianLocationScale,
    Independence,
    SimpleNull,
    fit_null,
    project,
    sample_null,
    true_null,
)
from .score import ScorePath, residual_matrix, score_path, score_path_oracle
from .stats import (
    StatisticSpec,
    cvm_closed_form,
    kiefer_wolfowitz,
    ks_statistic,
    mixture_sup_stat,
    normal_scores_stat,
    stat_quad,
    stat_sup,
)

__version__ = "0.1.0"
