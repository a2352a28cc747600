"""Numerics for the final-state problem of nonlinear Schroedinger equations with
time-decaying harmonic potentials."""

from .classical import (
    AsymptoticData,
    ClassicalSolution,
    PowerLawSolution,
    SigmaModel,
    closed_form_lambda,
    extract_asymptotics,
    solve_zeta,
    zeta_at,
)
from .field import Field, Grid, lp_norm, read_snapshot, write_snapshot
from .transforms import (
    dilate,
    fourier,
    inverse_fourier,
    mdfm_between,
    mdfm_inverse,
    mdfm_propagator,
    modulate,
    resample,
    undilate,
)
from .profile import ProfileSpec, R_op, gaussian, hat_w, nonlinearity, u_p
from .evolution import (
    SolverSettings,
    Trajectory,
    evolve,
    final_state_solve,
    picard_solve,
    remainder_A,
    remainder_E,
    step_strang,
)
from .params import (
    ParameterReport,
    admissible_pair,
    alpha_max,
    b_window,
    cubic_ledger,
    lambda_threshold,
    parameter_report,
)
from .diagnostics import (
    NormReport,
    fit_decay_rate,
    norm_report,
    sobolev_norm,
    strichartz_ratio,
    weighted_bochner_norm,
    x_T_norm,
)
from .config import RunConfig, parse_config, serialize

__version__ = "0.1.0"

__all__ = [
    "AsymptoticData",
    "ClassicalSolution",
    "Field",
    "Grid",
    "NormReport",
    "ParameterReport",
    "PowerLawSolution",
    "ProfileSpec",
    "R_op",
    "RunConfig",
    "SigmaModel",
    "SolverSettings",
    "Trajectory",
    "admissible_pair",
    "alpha_max",
    "b_window",
    "closed_form_lambda",
    "cubic_ledger",
    "dilate",
    "evolve",
    "extract_asymptotics",
    "final_state_solve",
    "fit_decay_rate",
    "fourier",
    "gaussian",
    "hat_w",
    "inverse_fourier",
    "lambda_threshold",
    "lp_norm",
    "mdfm_between",
    "mdfm_inverse",
    "mdfm_propagator",
    "modulate",
    "nonlinearity",
    "norm_report",
    "parameter_report",
    "parse_config",
    "picard_solve",
    "read_snapshot",
    "remainder_A",
    "remainder_E",
    "resample",
    "serialize",
    "sobolev_norm",
    "solve_zeta",
    "step_strang",
    "strichartz_ratio",
    "u_p",
    "undilate",
    "weighted_bochner_norm",
    "write_snapshot",
    "x_T_norm",
    "zeta_at",
]
