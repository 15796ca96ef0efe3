"""Receding-horizon simulation of the heterogeneously constrained controller."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .models import stage_cost, step
from .solver import SolverOptions, solve
from .transcription import HorizonPair, build_hcmpc

FAILURE_VIOLATION = 1e-6


@dataclass
class StepRecord:
    k: int
    state: np.ndarray
    input: np.ndarray
    stage_cost: float
    solution: object


@dataclass
class ClosedLoopRun:
    """History of a closed-loop run.

    ``states`` holds ``x_0 .. x_T`` (one more than the number of steps).
    """

    model: object
    horizons: HorizonPair
    steps: list
    states: np.ndarray
    termination: str
    J_T: float
    tail_estimate: float
    rho_hat: float
    safety_margin: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def stage_costs(self):
        return np.array([s.stage_cost for s in self.steps])

    @property
    def values(self):
        return np.array([s.solution.value for s in self.steps])

    @property
    def inputs(self):
        return np.array([s.input for s in self.steps])

    @property
    def solutions(self):
        return [s.solution for s in self.steps]

    def __len__(self):
        return len(self.steps)


def tail_from_costs(costs, window=5):
    """``(J_T, tail, rho_hat)`` from a stage-cost sequence.

    ``rho_hat`` is the least-squares geometric ratio of the last ``window``
    costs, clamped to ``[0, 0.999]``; the tail is ``l_last rho/(1 - rho)``.
    With fewer than ``window`` costs the tail is ``l_last``.
    """
    c = np.asarray(costs, float)
    if c.size == 0:
        raise InvalidArgument("empty cost sequence")
    J = float(np.sum(c))
    last = float(c[-1])
    if c.size < window:
        return J, last, float("nan")
    if last == 0.0:
        return J, 0.0, 0.0
    seg = c[-window:]
    if np.any(seg <= 0):
        rho = 0.999
    else:
        k = np.arange(window, dtype=float)
        slope = np.polyfit(k, np.log(seg), 1)[0]
        rho = float(np.clip(np.exp(slope), 0.0, 0.999))
    return J, last * rho / (1.0 - rho), rho


def truncated_cost(run):
    """``(J_T, tail_estimate)`` of a run; the tail is never added to ``J_T``."""
    if len(run.steps) == 0:
        raise InvalidArgument("run has no steps")
    J, tail, _ = tail_from_costs(run.stage_costs)
    return J, tail


def run(model, horizons, x0, T=200, opts=None, convergence_epsilon=1e-8,
        tail_patience=3):
    """Simulate the closed loop from ``x0``.

    At most ``T + 1`` steps (``k = 0..T``) are taken. The run stops early
    once the stage cost stays below ``convergence_epsilon * l(x0, 0)`` for
    ``tail_patience`` consecutive steps, or when the origin is reached with
    zero input. A step whose solve is infeasible (or violates constraints by
    more than 1e-6) ends the run with ``termination="solver_failure"``.
    """
    if not isinstance(horizons, HorizonPair):
        horizons = HorizonPair(*horizons)
    opts = SolverOptions() if opts is None else opts
    x = np.asarray(x0, float).reshape(model.state_dim)
    if int(T) < 0:
        raise InvalidArgument("T must be >= 0")
    ref = stage_cost(model, x, np.zeros(model.input_dim))
    thresh = convergence_epsilon * ref
    steps = []
    states = [x.copy()]
    warm = None
    termination = "horizon_reached"
    quiet = 0
    failure = None
    max_iter_steps = 0
    for k in range(int(T) + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ocp = build_hcmpc(model, horizons, x)
        sol = solve(ocp, warm, opts)
        if sol.status == "infeasible" or sol.constraint_violation > FAILURE_VIOLATION:
            termination = "solver_failure"
            failure = {"k": k, "status": sol.status,
                       "violation": sol.constraint_violation,
                       **sol.diagnostics}
            break
        if sol.status != "optimal":
            max_iter_steps += 1
        u = sol.inputs[0].copy()
        lk = stage_cost(model, x, u)
        x_next = step(model, x, u)
        steps.append(StepRecord(k, x.copy(), u, lk, sol))
        states.append(x_next.copy())
        x = x_next
        warm = sol
        if lk <= thresh:
            quiet += 1
        else:
            quiet = 0
        if (lk == 0.0 and not np.any(x)) or quiet >= tail_patience:
            termination = "converged"
            break
    states = np.array(states)
    margins = [np.min(model.safety_margins(s), initial=np.inf) for s in states]
    if steps:
        J, tail, rho = tail_from_costs([s.stage_cost for s in steps])
    else:
        J, tail, rho = 0.0, 0.0, float("nan")
    diag = {"max_iter_steps": max_iter_steps}
    if failure is not None:
        diag["failure"] = failure
    return ClosedLoopRun(model=model, horizons=horizons, steps=steps,
                         states=states, termination=termination, J_T=J,
                         tail_estimate=tail, rho_hat=rho,
                         safety_margin=float(np.min(margins)), diagnostics=diag)
