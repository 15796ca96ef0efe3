"""Brute-force dynamic programming on state and input grids.

Ground truth for low-dimensional models (``state_dim <= 2``,
``input_dim <= 1``). The table ``W[j]`` is the optimal ``j``-step cost to
go. For the heterogeneously constrained problem with constraint horizon
``Nt`` the state reached after a step with ``j`` stages to go must lie in
X1 when ``j >= Nt`` and in X2 otherwise; this matches the transcription's
index sets. Points that cannot be kept feasible carry ``+inf``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidArgument, UnsupportedConfiguration

_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """State and input grids.

    ``state_lo``/``state_hi``/``state_n`` are per state dimension;
    ``input_*`` likewise for inputs. ``interpolation`` is
    ``"multilinear"`` or ``"nearest"``.
    """

    state_lo: tuple = (-1.0,)
    state_hi: tuple = (1.0,)
    state_n: tuple = (401,)
    input_lo: tuple = (-1.0,)
    input_hi: tuple = (1.0,)
    input_n: tuple = (201,)
    interpolation: str = "multilinear"

    def __post_init__(self):
        for name in ("state_lo", "state_hi", "state_n", "input_lo", "input_hi", "input_n"):
            object.__setattr__(self, name, tuple(np.atleast_1d(getattr(self, name)).tolist()))
        if min(self.state_n + self.input_n) < 3:
            raise InvalidArgument("grid resolutions must be >= 3")
        if self.interpolation not in ("multilinear", "nearest"):
            raise InvalidArgument(f"unknown interpolation {self.interpolation!r}")
        if len({len(self.state_lo), len(self.state_hi), len(self.state_n)}) != 1:
            raise InvalidArgument("state grid fields differ in length")
        if len({len(self.input_lo), len(self.input_hi), len(self.input_n)}) != 1:
            raise InvalidArgument("input grid fields differ in length")

    @property
    def axes(self):
        return [np.linspace(a, b, int(n)) for a, b, n in
                zip(self.state_lo, self.state_hi, self.state_n)]

    @property
    def input_axes(self):
        return [np.linspace(a, b, int(n)) for a, b, n in
                zip(self.input_lo, self.input_hi, self.input_n)]

    @property
    def spacing(self):
        return max((b - a) / (n - 1) for a, b, n in
                   zip(self.state_lo, self.state_hi, self.state_n))


def default_grid(model):
    """Grid over the X2 bound of a scalar model and its input box."""
    if model.state_dim != 1:
        raise UnsupportedConfiguration("default grid only for scalar models; pass a GridSpec")
    b = float(model.params.get("x2_bound", 1.0) or 1.0)
    lo, hi = model.input_lower, model.input_upper
    return GridSpec(state_lo=(-b,), state_hi=(b,), input_lo=tuple(lo), input_hi=tuple(hi))


def _check_dims(model, grid):
    if model.state_dim > 2 or model.input_dim > 1:
        raise UnsupportedConfiguration(
            "dynamic programming oracle supports state_dim <= 2 and input_dim <= 1")
    if len(grid.state_n) != model.state_dim or len(grid.input_n) != model.input_dim:
        raise InvalidArgument("grid dimensions do not match the model")
    for p in model.x1_constraints + model.x2_constraints:
        if p.coupled:
            raise UnsupportedConfiguration("coupled predicates are not supported by the oracle")


def _batch_dynamics(model, X, U):
    if model.linear is not None:
        A, B = model.linear
        return X @ A.T + U @ B.T
    return np.array([model.dynamics(x, u) for x, u in zip(X, U)])


def _batch_cost(model, X, U):
    c = model.stage_cost
    if hasattr(c, "Q"):
        return np.einsum("ij,jk,ik->i", X, c.Q, X) + np.einsum("ij,jk,ik->i", U, c.R, U)
    return np.array([c(x, u) for x, u in zip(X, U)])


def _batch_feasible(preds, X):
    ok = np.ones(X.shape[0], bool)
    for p in preds:
        if p.affine is not None:
            C, d = p.affine
            ok &= np.all(X @ C.T + d <= _FEAS_TOL, axis=1)
        else:
            ok &= np.array([np.all(p(x) <= _FEAS_TOL) for x in X])
    return ok


class DPTables:
    """Value tables of one recursion, with on-the-fly evaluation helpers."""

    def __init__(self, model, grid, tables, Ntilde, kind):
        self.model = model
        self.grid = grid
        self.tables = tables
        self.Ntilde = Ntilde
        self.kind = kind
        self._axes = grid.axes
        self._inputs = np.array(np.meshgrid(*grid.input_axes, indexing="ij")).reshape(
            model.input_dim, -1).T
        method = "linear" if grid.interpolation == "multilinear" else "nearest"
        self._interp = [RegularGridInterpolator(self._axes, t, method=method,
                                                bounds_error=False, fill_value=np.inf)
                        for t in tables]

    @property
    def N(self):
        return len(self.tables) - 1

    def next_set(self, j):
        """Set imposed on the state reached with ``j`` stages to go."""
        if self.kind == "HCMPC" and j >= self.Ntilde:
            return self.model.x1_constraints
        return self.model.x2_constraints

    def table_at(self, j, X):
        """Interpolated ``W[j]`` at the rows of ``X``."""
        X = np.atleast_2d(X)
        if j == 0:
            return np.zeros(X.shape[0])
        with np.errstate(invalid="ignore"):
            v = self._interp[j](X)
        return np.where(np.isnan(v), np.inf, v)

    def q_values(self, x, j):
        """``l(x, u) + W[j-1](f(x, u))`` over the input grid (``inf`` if infeasible)."""
        x = np.asarray(x, float).reshape(self.model.state_dim)
        U = self._inputs
        X = np.repeat(x[None, :], U.shape[0], axis=0)
        Xn = _batch_dynamics(self.model, X, U)
        q = _batch_cost(self.model, X, U) + self.table_at(j - 1, Xn)
        feas = _batch_feasible(self.next_set(j), Xn)
        return np.where(feas, q, np.inf)

    def value(self, x, j=None):
        """Optimal ``j``-step value at an arbitrary state (default ``j = N``)."""
        j = self.N if j is None else j
        if j == 0:
            return 0.0
        return float(np.min(self.q_values(x, j)))

    def policy(self, x, j=None):
        """Minimizing grid input at ``x`` with ``j`` stages to go."""
        j = self.N if j is None else j
        q = self.q_values(x, j)
        i = int(np.argmin(q))
        if not np.isfinite(q[i]):
            raise InvalidArgument("no feasible grid input at this state")
        return self._inputs[i].copy()


def dp_value(model, N, problem="UCMPC", grid=None, Ntilde=None):
    """Backward recursion ``W[0] = 0``, ``W[j] = min_u l + W[j-1](f)``.

    Parameters
    ----------
    model : ModelSpec
    N : int
        Number of stages.
    problem : {"UCMPC", "HCMPC"}
    grid : GridSpec, optional
    Ntilde : int
        Constraint horizon, required for ``"HCMPC"``.

    Returns
    -------
    DPTables
    """
    grid = default_grid(model) if grid is None else grid
    _check_dims(model, grid)
    if problem not in ("UCMPC", "HCMPC"):
        raise InvalidArgument(f"unknown problem {problem!r}")
    N = int(N)
    if problem == "HCMPC":
        if Ntilde is None or not (2 <= Ntilde <= N):
            raise InvalidArgument("HCMPC needs 2 <= Ntilde <= N")
    elif N < 1:
        raise InvalidArgument("UCMPC needs N >= 1")
    axes = grid.axes
    shape = tuple(len(a) for a in axes)
    S = np.array(np.meshgrid(*axes, indexing="ij")).reshape(model.state_dim, -1).T
    U = np.array(np.meshgrid(*grid.input_axes, indexing="ij")).reshape(model.input_dim, -1).T
    ns, nu = S.shape[0], U.shape[0]
    Xr = np.repeat(S, nu, axis=0)
    Ur = np.tile(U, (ns, 1))
    Xn = _batch_dynamics(model, Xr, Ur)
    L = _batch_cost(model, Xr, Ur).reshape(ns, nu)
    feas = {
        "X1": _batch_feasible(model.x1_constraints, Xn).reshape(ns, nu),
        "X2": _batch_feasible(model.x2_constraints, Xn).reshape(ns, nu),
    }
    tables = [np.zeros(shape)]
    result = DPTables(model, grid, tables, Ntilde, problem)
    for j in range(1, N + 1):
        which = "X1" if problem == "HCMPC" and j >= Ntilde else "X2"
        nxt = result.table_at(j - 1, Xn).reshape(ns, nu)
        q = np.where(feas[which], L + nxt, np.inf)
        tables.append(np.min(q, axis=1).reshape(shape))
        result = DPTables(model, grid, tables, Ntilde, problem)
    return result


def dp_closed_loop(model, horizons, x0, T, grid=None):
    """Closed-loop cost of the receding-horizon policy read off the DP tables.

    Takes ``T`` steps (``k = 0..T-1``); returns ``(J, states, inputs)``.
    """
    N, Nt = (horizons.N, horizons.Ntilde) if hasattr(horizons, "N") else horizons
    tab = dp_value(model, N, "HCMPC", grid, Ntilde=Nt)
    x = np.asarray(x0, float).reshape(model.state_dim)
    J = 0.0
    xs, us = [x.copy()], []
    for _ in range(int(T)):
        if not np.any(x):
            u = np.zeros(model.input_dim)
        else:
            u = tab.policy(x)
        J += float(model.stage_cost(x, u))
        x = np.asarray(model.dynamics(x, u), float)
        xs.append(x.copy())
        us.append(u)
    return J, np.array(xs), np.array(us)
