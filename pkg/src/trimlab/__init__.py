"""trimlab: trimmed and Winsorized mean estimators, population window
functionals, trimming-regime diagnostics, order-statistic moment bounds,
and reproducible Monte Carlo tail-ratio experiments."""

__version__ = "0.1.0"

from . import errors
from .distributions import (
    DistributionSpec,
    abs_moment,
    cauchy,
    cdf,
    exponential,
    normal,
    pareto,
    quantile,
    sample,
    student_t,
    two_point,
    uniform,
)
from .estimators import (
    CountStatistics,
    SampleDecomposition,
    counts,
    decompose,
    empirical_quantile,
    order_statistics,
    remainder,
    trimmed_mean,
    trimmed_mean_integral,
    winsorize,
)
from .functionals import (
    PopulationFunctionals,
    mu_functional,
    normalizers,
    population_functionals,
    sigma2_functional,
    sigma2_stieltjes,
    winsorized_moments,
)
from .momentbound import BoundQuery, BoundVerification, bound_value, constant, verify_bound
from .montecarlo import (
    CenterEstimates,
    ConfidenceInterval,
    DecompositionAudit,
    ExperimentConfig,
    MillsReport,
    TailRatioReport,
    TailRow,
    ci_expectation,
    clopper_pearson,
    config_from_json,
    decomposition_audit,
    estimate_centers,
    kolmogorov_distance,
    mills_check,
    normal_cdf,
    normal_tail,
    run_experiment,
)
from .schedules import (
    CONSISTENT,
    DEFAULT_N_GRID,
    INCONCLUSIVE,
    INCONSISTENT,
    ConditionReport,
    TrimmingSchedule,
    check_c_an2,
    check_cgh,
    check_heavy,
    check_intermediate,
    evaluate,
    explicit,
    fixed_fraction,
    log_power,
    power_law,
    psi_1n,
    psi_2n,
    smoothness_GH,
)
