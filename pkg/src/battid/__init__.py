"""battid: continuous-time battery circuit identification from sampled data.

Identifies the series resistance, two RC branches, and the open-circuit
voltage curve of a lithium-ion cell directly from current/voltage logs, by
filtering the signals through a Laguerre bank and solving a structured-rank
plus L1 regularized least squares problem.  A built-in exact simulator
generates validation data.
"""
from ._accel import USING_NUMBA
from .bspline import (
    KnotVector,
    SplineCurve,
    design_matrix,
    diff_matrix,
    eval_basis,
    eval_deriv,
    third_deriv_matrix,
    uniform_clamped,
)
from .ecm import (
    EcmParams,
    OcvFunction,
    SimConfig,
    gen_drive_cycle,
    ocv_sim_curve,
    sim_ocv,
    simulate,
)
from .evaluate import (
    FitReport,
    GridResult,
    GridSpec,
    MonteCarloResult,
    grid_search,
    identify,
    monte_carlo,
    rmse,
    simulate_identified,
    vaf,
)
from .laguerre import (
    LagCoeffs,
    LaguerreBank,
    coeff_transform,
    discretize,
    filter_signal,
    tf_eval,
)
from .recovery import (
    RecoveredParams,
    TfCoeffs,
    physical_to_tf,
    tf_to_physical,
    tilde_to_tf,
    time_constants,
    zoh_gain_debias,
)
from .regression import IdConfig, IdProblem, assemble, dump_problem
from .signals import (
    BatteryMeta,
    CsvSchema,
    SampledRecord,
    coulomb_count,
    load_csv,
    save_csv,
    sort_by_soc,
)
from .solver import Solution, extract_rank_one, prox_l1, prox_nuclear, solve
from .solver_settings import SolverSettings

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA",
    "KnotVector", "SplineCurve", "design_matrix", "diff_matrix",
    "eval_basis", "eval_deriv", "third_deriv_matrix", "uniform_clamped",
    "EcmParams", "OcvFunction", "SimConfig", "gen_drive_cycle",
    "ocv_sim_curve", "sim_ocv", "simulate",
    "FitReport", "GridResult", "GridSpec", "MonteCarloResult",
    "grid_search", "identify", "monte_carlo", "rmse",
    "simulate_identified", "vaf",
    "LagCoeffs", "LaguerreBank", "coeff_transform", "discretize",
    "filter_signal", "tf_eval",
    "RecoveredParams", "TfCoeffs", "physical_to_tf", "tf_to_physical",
    "tilde_to_tf", "time_constants", "zoh_gain_debias",
    "IdConfig", "IdProblem", "assemble", "dump_problem",
    "BatteryMeta", "CsvSchema", "SampledRecord", "coulomb_count",
    "load_csv", "save_csv", "sort_by_soc",
    "Solution", "extract_rank_one", "prox_l1", "prox_nuclear", "solve",
    "SolverSettings",
    "__version__",
]
