"""Loss reweighting for time-series forecasting from local-discrepancy density.

Builds per-sample loss weights that down-weight abrupt changes (rare, large
input/output discrepancy) and up-weight normal states, plus the baselines,
synthetic generators, and a small linear forecaster to measure the effect.
"""

from .discrepancy import (
    LdMetric,
    LdProfile,
    SingularCovarianceError,
    hotelling_ld,
    kpss_ld,
    ld_profile,
    periodicity_residual,
    welch_ld,
    window_moment_residual,
)
from .forecaster import (
    EvalReport,
    LinearForecaster,
    TrainConfig,
    TrainResult,
    evaluate,
    grad_check,
    load_model,
    save_model,
    train,
)
from .losses import (
    ema,
    error_weight,
    filter_outliers,
    moving_average,
    weighted_loss,
)
from .series import (
    CsvFormatError,
    Series,
    WindowPair,
    WindowSet,
    WindowSpec,
    load_csv,
    make_windows,
    window_stats,
)
from .synth import (
    AbruptEvent,
    LabeledSeries,
    PeriodicSpec,
    RectSpec,
    gen_periodic,
    gen_rect,
    inject_abrupt,
    window_labels,
)
from .weighting import (
    DensityEstimate,
    Histogram,
    KernelSpec,
    WeightTable,
    build_histogram,
    invld_weights,
    normalize_weights,
    reld_weights,
    smooth_density,
    uniform_weights,
)

__version__ = "0.1.0"
