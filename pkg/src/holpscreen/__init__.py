"""Variable screening for p >> n linear regression.

The central estimator ranks predictors by the minimum-norm least-squares
projection |X'(XX')^{-1} y| (the limit of ridge regression as the penalty
vanishes), alongside ridge, divide-and-combine, marginal-correlation,
rank-correlation and forward-regression screeners, a Lasso/EBIC second
stage, seeded simulation designs and a Monte-Carlo benchmark harness.
"""

from .exceptions import (
    ConfigError,
    ConvergenceError,
    DegeneracyWarning,
    DegenerateRegimeError,
    DimensionMismatchError,
    IngestError,
    NotPositiveDefiniteError,
    PipelineStageError,
    RankDeficientError,
    SaturatedFitError,
)
from .metrics import (
    CvResult,
    ExperimentReport,
    SelectionMetrics,
    dominance_ratio,
    inclusion_probability,
    kfold_cv,
    run_experiment,
    score_selection,
    separation_probability,
    timing_run,
)
from .modelselect import (
    EbicSized,
    FitResult,
    PipelineSpec,
    ebic,
    ebic_size,
    lasso_path,
    make_lambda_grid,
    ols_refit,
    run_pipeline,
)
from .screeners import (
    ScreeningScores,
    SubmodelSelection,
    Threshold,
    TopD,
    divide_holp_scores,
    forward_regression_rank,
    holp_scores,
    projection_submatrix,
    rank_select,
    ridge_holp_scores,
    rrcs_scores,
    sis_scores,
    threshold_select,
)
from .simgen import (
    Family,
    SimDataset,
    SimScenario,
    calibrate_noise,
    draw_design,
    make_beta,
    replicate_rng,
    signal_variance,
    simulate_dataset,
    trend_schedule,
)

__version__ = "0.1.0"
