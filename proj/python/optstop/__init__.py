"""Neural optimal stopping: Python access to the C++ core."""

from ._optstop import (
    ConfigError,
    benchmark_names,
    binomial_american,
    bs_euro_call,
    canonical_config,
    compose_soft_factors,
    first_exercise_index,
    price_config,
    reduce_dimension,
    set_thread_count,
)

__all__ = [
    "ConfigError",
    "benchmark_names",
    "binomial_american",
    "bs_euro_call",
    "canonical_config",
    "compose_soft_factors",
    "first_exercise_index",
    "price_config",
    "reduce_dimension",
    "set_thread_count",
]
