"""Stacked Bayesian spatial-temporal varying-coefficient models."""

from ._core import (
    ConfigError,
    DyKind,
    Error,
    Family,
    Kernel,
    NumericalError,
    chol_delete_block,
    cholesky,
    cond_t_params,
    corr_matrix,
    dy_sample,
    ef_log_density,
    project,
    run_cli,
    simulate,
    solve_weights,
)

__all__ = [
    "ConfigError",
    "DyKind",
    "Error",
    "Family",
    "Kernel",
    "NumericalError",
    "chol_delete_block",
    "cholesky",
    "cond_t_params",
    "corr_matrix",
    "dy_sample",
    "ef_log_density",
    "project",
    "run_cli",
    "simulate",
    "solve_weights",
]
