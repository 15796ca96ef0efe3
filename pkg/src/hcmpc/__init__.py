"""Heterogeneously constrained MPC with closed-loop suboptimality bounds."""

__version__ = "0.1.0"

from .bounds import BoundReport, compute_bounds  # noqa: E402
from .closed_loop import ClosedLoopRun, run  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError, DegenerateState, HCMPCError, Inapplicable, InvalidArgument,
    UnsupportedConfiguration,
)
from .models import ModelSpec, make_model  # noqa: E402
from .solver import OpenLoopSolution, SolverOptions, solve  # noqa: E402
from .transcription import HorizonPair, build_hcmpc, build_ucmpc  # noqa: E402

__all__ = [
    "BoundReport", "ClosedLoopRun", "ConfigError", "DegenerateState", "HCMPCError",
    "HorizonPair", "Inapplicable", "InvalidArgument", "ModelSpec", "OpenLoopSolution",
    "SolverOptions", "UnsupportedConfiguration", "__version__", "build_hcmpc",
    "build_ucmpc", "compute_bounds", "make_model", "run", "solve",
]
