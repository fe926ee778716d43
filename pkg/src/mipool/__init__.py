"""Finite- and infinite-population pooling of multiply imputed estimates."""

from .data import (
    ImputationStack,
    IncompleteDataset,
    RepeatedEstimates,
    column_observed_values,
    stack_estimates,
)
from .imputer import ImputerConfig, mice, norm_draw
from .mathkit import RngStream, cholesky, t_quantile
from .pooling import (
    PooledResult,
    Rule,
    barnard_rubin_df,
    pool,
    pool_conventional,
    pool_simplified,
    pool_vector,
)
from .simulation import ConditionSummary, SimulationConfig, run_replication, run_study

__all__ = [
    "ConditionSummary",
    "ImputationStack",
    "ImputerConfig",
    "IncompleteDataset",
    "PooledResult",
    "RepeatedEstimates",
    "RngStream",
    "Rule",
    "SimulationConfig",
    "barnard_rubin_df",
    "cholesky",
    "column_observed_values",
    "mice",
    "norm_draw",
    "pool",
    "pool_conventional",
    "pool_simplified",
    "pool_vector",
    "run_replication",
    "run_study",
    "stack_estimates",
    "t_quantile",
]
