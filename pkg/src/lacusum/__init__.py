"""Robust online change-point detection for high-dimensional data streams.

Per-stream robust CUSUM-type statistics with soft-threshold fusion, plus the
tuning, breakdown, calibration and simulation machinery around them.
"""

from .breakdown import (
    BreakdownReport,
    SupSearch,
    alpha_opt,
    breakdown_grid,
    breakdown_point,
    breakdown_report,
    density_power_divergence,
    increment_sup,
    m_alpha,
    worst_case_drift,
)
from .calibration import (
    CalibrationResult,
    RunEstimate,
    calibrate_threshold,
    estimate_arl,
    run_lengths,
)
from .detectors import (
    DetectorBank,
    FusionRule,
    GlrParams,
    GlrScheme,
    LAlphaScheme,
    LocalParams,
    StepDecision,
    StreamMonitor,
    bank_update,
    fuse,
    glr_step,
    lalpha_increment,
    run_to_alarm,
    simulate_run_lengths,
    u_plus,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateCoefficientError,
    MgfDivergenceError,
    NoDensityError,
    NoPositiveRootError,
    NumericError,
    QuadratureError,
)
from .experiments import (
    CurvePoint,
    DelayRow,
    ExperimentSpec,
    arl_vs_epsilon_curve,
    run_delay_table,
    simulate_delay,
    tuning_curves,
)
from .models import (
    ChangeScenario,
    GrossErrorModel,
    MixtureStreamSampler,
    NominalFamily,
    OutlierSpec,
    mixture_pdf,
    nominal_pdf,
    sample_matrix,
)
from .profiles import (
    BaselineStats,
    CaseStudyRow,
    PoolStreamSampler,
    ProfileGeneratorConfig,
    ProfilePool,
    case_study_run,
    fit_baseline,
    haar_transform,
    inverse_haar_transform,
    load_pool,
    read_signals_csv,
    retain_and_standardize,
    save_pool,
    synth_pool,
    write_signals_csv,
)
from .tuning import (
    GridRow,
    QuadratureConfig,
    TuningReport,
    alpha_oracle,
    arl_lower_bound,
    b_gamma,
    d_opt,
    efficiency_improvement,
    info_number,
    info_number_closed_form,
    solve_lambda,
    solve_mgf_root,
    tuning_grid,
    tuning_report,
)

__version__ = "0.1.0"
