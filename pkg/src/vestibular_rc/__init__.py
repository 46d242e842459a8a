"""Vestibular reservoir computing: canal-driven FitzHugh-Nagumo networks.

A reservoir computer whose nodes are semicircular-canal mechanical
elements feeding FitzHugh-Nagumo neurons, with coupled (random sparse
symmetric) and uncoupled (diagonal) connectivity, ridge-regression
readout, chaotic forecasting benchmarks, attractor statistics, and a
memory-capacity toolkit covering both empirical estimators and the
analytic linear-reservoir theory.
"""

from . import (
    dynamics,
    errors,
    harness,
    memory,
    metrics,
    readout,
    reporting,
    reservoir,
    topology,
)
from .dynamics import TimeSeries, generate_benchmark
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    ensemble_sweep,
    random_search,
    run_experiment,
    tuned_config,
)
from .memory import (
    analytic_memory_curve,
    memory_capacity,
    memory_curve_vestibular,
    memory_function,
)
from .metrics import largest_lyapunov

__version__ = "0.1.0"

__all__ = [
    "dynamics",
    "errors",
    "harness",
    "memory",
    "metrics",
    "readout",
    "reporting",
    "reservoir",
    "topology",
    "TimeSeries",
    "generate_benchmark",
    "ExperimentConfig",
    "ExperimentReport",
    "ensemble_sweep",
    "random_search",
    "run_experiment",
    "tuned_config",
    "analytic_memory_curve",
    "memory_capacity",
    "memory_curve_vestibular",
    "memory_function",
    "largest_lyapunov",
    "__version__",
]
