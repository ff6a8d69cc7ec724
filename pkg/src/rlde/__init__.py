"""Learned per-problem design of differential evolution from landscape features."""

from rlde.bbob import ProblemInstance, evaluate, gap, make_instance, suite_split
from rlde.de import CANONICAL_DE, DEConfig, RunResult, run_de
from rlde.errors import CheckpointError, ConfigurationError

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_DE",
    "CheckpointError",
    "ConfigurationError",
    "DEConfig",
    "ProblemInstance",
    "RunResult",
    "evaluate",
    "gap",
    "make_instance",
    "run_de",
    "suite_split",
]
