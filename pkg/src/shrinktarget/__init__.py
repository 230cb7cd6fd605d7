"""shrinktarget: a simulation-and-verification laboratory for the shrinking
target problem on expanding interval maps.

Exact transfer-operator identity checks, closed-form variance growth,
Monte Carlo central-limit statistics and hypothesis diagnostics for nested
ball targets B_i(p) with mu(B_i) = min(1, C / i^gamma).
"""

__version__ = "0.1.0"

from .backend import active_backend, requested_backend, set_threads
from .dynamics import (
    MapSystem,
    beta_map,
    doubling_map,
    exact_bit_orbit,
    gauss_map,
    iterate,
    make_map,
    markov_linear_map,
    measure_of_ball,
    tent_map,
    toral_map,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InputExhaustedError,
    ParameterError,
    ResourceLimitError,
    ShrinkTargetError,
    UnsupportedMapError,
)
from .mcstats import EnsembleSummary, ks_distance, normalized_statistic, run_ensemble, sbc_ratio
from .targets import GENERIC_CENTER, TargetSchedule, build_schedule, dyadic_schedule, membership
from .transfer import (
    TransferModel,
    markov_exact_model,
    martingale_decompose,
    spectral_gap,
    ulam_matrix,
    variance_identities,
)
from .transfer import exact_variance, variance_curve
from .diagnostics import (
    AssumptionCParams,
    assumption_c_report,
    gal_koksma_residual,
    quasi_holder_seminorm,
    recurrence_set_measure,
    short_return_measure,
    sp_constant,
)

__all__ = [
    "__version__",
    "active_backend", "requested_backend", "set_threads",
    "MapSystem", "make_map", "doubling_map", "tent_map", "beta_map",
    "gauss_map", "markov_linear_map", "toral_map", "iterate",
    "measure_of_ball", "exact_bit_orbit",
    "ShrinkTargetError", "DomainError", "UnsupportedMapError",
    "ParameterError", "InputExhaustedError", "ResourceLimitError",
    "ConvergenceError", "ConfigError",
    "GENERIC_CENTER", "TargetSchedule", "build_schedule", "dyadic_schedule",
    "membership",
    "TransferModel", "ulam_matrix", "markov_exact_model", "spectral_gap",
    "martingale_decompose", "variance_identities", "exact_variance",
    "variance_curve",
    "EnsembleSummary", "run_ensemble", "sbc_ratio", "normalized_statistic",
    "ks_distance",
    "AssumptionCParams", "assumption_c_report", "short_return_measure",
    "sp_constant", "gal_koksma_residual", "recurrence_set_measure",
    "quasi_holder_seminorm",
]
