"""Hotspot chemotaxis simulator: finite-volume solver and analysis tools
for a two-field attractiveness / offender-density reaction-diffusion model
with logarithmic sensitivity."""

from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    gradient,
    divergence,
    laplacian,
    integral,
    mean,
    lp_norm,
    osc,
    helmholtz_solve,
    cosine_mode,
    sample_cosine_field,
    read_field,
    write_field,
)
from .model import (
    ModelParams,
    ShortParams,
    GeneralModel,
    DerivedBounds,
    steady_state,
    short_steady_state,
    derived_bounds,
    validate_general_hypotheses,
)
from .analysis import (
    ExistenceReport,
    check_global_condition,
    critical_constants,
    entropy_params,
    entropy_phi,
    entropy_Y,
    choose_c,
    verify_apriori,
    energy_residuals,
    poincare_probe,
    interpolation_probe,
    diagnostics_record,
)
from .solver import SimState, SimConfig, InitialCondition, Outcome, RunResult, run, step

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "gradient",
    "divergence",
    "laplacian",
    "integral",
    "mean",
    "lp_norm",
    "osc",
    "helmholtz_solve",
    "cosine_mode",
    "sample_cosine_field",
    "read_field",
    "write_field",
    "ModelParams",
    "ShortParams",
    "GeneralModel",
    "DerivedBounds",
    "steady_state",
    "short_steady_state",
    "derived_bounds",
    "validate_general_hypotheses",
    "ExistenceReport",
    "check_global_condition",
    "critical_constants",
    "entropy_params",
    "entropy_phi",
    "entropy_Y",
    "choose_c",
    "verify_apriori",
    "energy_residuals",
    "poincare_probe",
    "interpolation_probe",
    "diagnostics_record",
    "SimState",
    "SimConfig",
    "InitialCondition",
    "Outcome",
    "RunResult",
    "run",
    "step",
]

__version__ = "0.1.0"
