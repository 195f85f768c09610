"""Learning dynamics for general preference games on the probability simplex."""

from .errors import ConfigError, DimensionError, DomainError, PrefGameError, SolverError
from .games import (
    PreferenceModel,
    RegularizedGame,
    appendix_e_game,
    duality_gap,
    solve_nash,
    solve_regularized_nash,
    win_rate,
)
from .oracles import OracleMode
from .simplex import kl_divergence, prox
from .solvers import SolverConfig, Trajectory, run

__all__ = [
    "ConfigError",
    "DimensionError",
    "DomainError",
    "OracleMode",
    "PrefGameError",
    "PreferenceModel",
    "RegularizedGame",
    "SolverConfig",
    "SolverError",
    "Trajectory",
    "appendix_e_game",
    "duality_gap",
    "kl_divergence",
    "prox",
    "run",
    "solve_nash",
    "solve_regularized_nash",
    "win_rate",
]
