"""Experiment definitions and horizon sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import DELTA_METHODS, NU_METHODS, PROVENANCE, compute_bounds
from .closed_loop import run as run_closed_loop
from .errors import HCMPCError, InvalidArgument
from .models import constraint_residuals, make_model
from .solver import SolverOptions
from .transcription import HorizonPair

QUADROTOR_X0 = (1.0, 2.0, -1.0) + (0.0,) * 9
DOUBLE_INTEGRATOR_X0 = (-0.8, 0.6, -0.45, 0.65)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one run or sweep."""

    model: str
    pairs: tuple
    x0: tuple
    overrides: dict = field(default_factory=dict)
    T: int = 200
    solver: SolverOptions = field(default_factory=SolverOptions)
    delta_method: str = "heuristic"
    nu_method: str = "heuristic"
    provenance: str = "x0_only"
    baseline_lcss: bool = False
    name: str = ""

    def __post_init__(self):
        pairs = tuple(p if isinstance(p, HorizonPair) else HorizonPair(*p) for p in self.pairs)
        if not pairs:
            raise InvalidArgument("sweep needs at least one (N, Ntilde) pair")
        if len(set(pairs)) != len(pairs):
            raise InvalidArgument("duplicate (N, Ntilde) pairs")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "x0", tuple(float(v) for v in np.ravel(self.x0)))
        if int(self.T) != self.T or self.T < 0:
            raise InvalidArgument("T must be a nonnegative integer")
        if self.delta_method not in DELTA_METHODS:
            raise InvalidArgument(f"delta method must be one of {DELTA_METHODS}")
        if self.nu_method not in NU_METHODS:
            raise InvalidArgument(f"nu method must be one of {NU_METHODS}")
        if self.provenance not in PROVENANCE:
            raise InvalidArgument(f"provenance must be one of {PROVENANCE}")

    def build_model(self):
        return make_model(self.model, **self.overrides)

    def validate(self):
        """Check the initial state against the model and its X1 predicates."""
        m = self.build_model()
        if len(self.x0) != m.state_dim:
            raise InvalidArgument(f"x0 has {len(self.x0)} entries, model state_dim is {m.state_dim}")
        res = constraint_residuals(m, np.array(self.x0), "X1")
        if res.size and np.max(res) > 1e-8:
            raise InvalidArgument("x0 violates X1")
        return m


def _sweep_pairs(Ns):
    return tuple((N, Nt) for N in Ns for Nt in range(2, N))


def quadrotor_scenario(**overrides):
    """Single UAV avoiding a static second UAV; pairs (16, 13) and (27, 24)."""
    base = dict(model="quadrotor6dof", pairs=((16, 13), (27, 24)), x0=QUADROTOR_X0,
                T=150, delta_method="prop4", nu_method="prop7", name="quadrotor")
    return _with(base, overrides)


def double_integrator_scenario(**overrides):
    """CBF-constrained planar double integrator swept at N = 10 and N = 20."""
    base = dict(model="double_integrator", pairs=_sweep_pairs((10, 20)),
                x0=DOUBLE_INTEGRATOR_X0, T=300, provenance="full_trajectory",
                baseline_lcss=True, name="double_integrator")
    return _with(base, overrides)


def scalar_scenario(**overrides):
    """Scalar verification system swept at N = 4..6."""
    base = dict(model="scalar_test", pairs=_sweep_pairs((4, 5, 6)), x0=(0.4,), T=60,
                name="scalar_test")
    return _with(base, overrides)


def _with(base, overrides):
    model_overrides = dict(overrides.pop("overrides", {}) or {})
    base.update(overrides)
    base["overrides"] = model_overrides
    return ScenarioConfig(**base)


@dataclass
class SweepRow:
    N: int
    Ntilde: int
    V: float = float("nan")
    J_T: float = float("nan")
    tail: float = float("nan")
    termination: str = ""
    safety_margin: float = float("nan")
    report: object = None
    run: object = None
    error: str = None

    @property
    def failed(self):
        return self.error is not None or self.termination == "solver_failure"


def run_pair(config, pair, keep_run=True):
    """Closed-loop run plus bounds for one pair; failures are captured in the row."""
    model = config.build_model()
    row = SweepRow(N=pair.N, Ntilde=pair.Ntilde)
    try:
        r = run_closed_loop(model, pair, np.array(config.x0), T=config.T, opts=config.solver)
        row.termination = r.termination
        row.J_T, row.tail = r.J_T, r.tail_estimate
        row.safety_margin = r.safety_margin
        if r.steps:
            row.V = r.steps[0].solution.value
            row.report = compute_bounds(r, config.delta_method, config.nu_method,
                                        config.provenance, config.baseline_lcss, config.solver)
        if keep_run:
            row.run = r
    except (HCMPCError, np.linalg.LinAlgError, FloatingPointError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def sweep(config, jobs=1, keep_runs=False):
    """One row per ``(N, Ntilde)`` pair, ordered by ``(N, Ntilde)``.

    Rows run independently (in parallel with ``jobs > 1``); a failing row
    is marked and the sweep continues.
    """
    config.validate()
    pairs = sorted(config.pairs, key=lambda p: (p.N, p.Ntilde))
    if jobs == 1:
        rows = [run_pair(config, p, keep_runs) for p in pairs]
    else:
        from joblib import Parallel, delayed
        rows = Parallel(n_jobs=jobs)(delayed(run_pair)(config, p, keep_runs) for p in pairs)
    return sorted(rows, key=lambda r: (r.N, r.Ntilde))


def single(config, pair=None):
    """Run only ``pair`` (default: the first configured pair)."""
    pair = config.pairs[0] if pair is None else pair
    return sweep(replace(config, pairs=(pair,)), keep_runs=True)[0]
