"""Finite-horizon optimal control problems with heterogeneous state constraints.

For horizons ``(N, Nt)`` with ``K = N - Nt`` the predicted states ``1..K+1``
carry the X1 predicates and states ``K+2..N`` carry X2. Coupled X1
predicates act on the pairs ``(x(n-1), x(n))`` for every X1 stage ``n``.
The uniformly constrained problem puts X2 on every predicted state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .models import constraint_residuals

START_TOLERANCE = 1e-8


@dataclass(frozen=True)
class HorizonPair:
    """Prediction horizon ``N`` and constraint horizon ``Ntilde``."""

    N: int
    Ntilde: int

    def __post_init__(self):
        N, Nt = self.N, self.Ntilde
        if int(N) != N or int(Nt) != Nt:
            raise InvalidArgument("horizons must be integers")
        object.__setattr__(self, "N", int(N))
        object.__setattr__(self, "Ntilde", int(Nt))
        if self.N < 2 or not (2 <= self.Ntilde <= self.N):
            raise InvalidArgument(
                f"need N >= 2 and 2 <= Ntilde <= N, got N={N}, Ntilde={Nt}")

    @property
    def K(self):
        """Number of stages ``N - Ntilde``."""
        return self.N - self.Ntilde

    @property
    def explicit_ok(self):
        """Whether the closed-form bounds apply (``N >= 3``, ``Ntilde <= N-1``)."""
        return self.N >= 3 and self.Ntilde <= self.N - 1

    def require_explicit(self):
        if not self.explicit_ok:
            raise InvalidArgument(
                f"closed-form bounds need N >= 3 and 2 <= Ntilde <= N-1, "
                f"got N={self.N}, Ntilde={self.Ntilde}")


@dataclass(frozen=True)
class OcpSpec:
    """Transcribed problem.

    Decision variables are the ``N`` inputs and ``N+1`` states; the
    equalities pin ``x(0) = x_k`` and chain ``x(n+1) = f(x(n), u(n))``.
    ``stage_sets[n]`` names the set imposed on predicted state ``n``
    (``None`` for ``n = 0``).
    """

    model: object
    N: int
    Ntilde: object          # int for HC-MPC, None for UC-MPC
    kind: str               # "HC" or "UC"
    x_k: np.ndarray
    stage_sets: tuple
    infeasible_start: bool = False

    @property
    def x1_stages(self):
        return tuple(n for n, s in enumerate(self.stage_sets) if s == "X1")

    @property
    def x2_stages(self):
        return tuple(n for n, s in enumerate(self.stage_sets) if s == "X2")

    @property
    def horizons(self):
        return HorizonPair(self.N, self.Ntilde) if self.kind == "HC" else None

    def predicates(self, n):
        """Predicates imposed on predicted state ``n``."""
        s = self.stage_sets[n]
        if s == "X1":
            return self.model.x1_constraints
        if s == "X2":
            return self.model.x2_constraints
        return ()

    def equality_count(self):
        nx = self.model.state_dim
        return nx * (self.N + 1)

    def inequality_count(self):
        """Scalar inequality counts per block."""
        m = self.model
        box = int(np.sum(np.isfinite(m.input_lower)) + np.sum(np.isfinite(m.input_upper)))
        x1 = sum(p.size for p in m.x1_constraints)
        x2 = sum(p.size for p in m.x2_constraints)
        return {
            "input_box": box * self.N,
            "X1": x1 * len(self.x1_stages),
            "X2": x2 * len(self.x2_stages),
        }

    def rollout(self, inputs):
        """States ``x(0..N)`` generated from ``x_k`` by ``inputs``."""
        inputs = np.asarray(inputs, float).reshape(self.N, self.model.input_dim)
        X = np.empty((self.N + 1, self.model.state_dim))
        X[0] = self.x_k
        for n in range(self.N):
            X[n + 1] = self.model.dynamics(X[n], inputs[n])
        return X

    def stage_costs(self, states, inputs):
        return np.array([float(self.model.stage_cost(states[n], inputs[n]))
                         for n in range(self.N)])

    def objective(self, states, inputs):
        return float(np.sum(self.stage_costs(states, inputs)))

    def residuals(self, states):
        """Stacked state-predicate values for predicted states ``1..N``."""
        out = []
        for n in range(1, self.N + 1):
            for p in self.predicates(n):
                out.append(p(states[n - 1], states[n]) if p.coupled else p(states[n]))
        return np.concatenate(out) if out else np.zeros(0)


def _check_state(model, x_k):
    x_k = np.asarray(x_k, float)
    if x_k.shape != (model.state_dim,):
        raise InvalidArgument(
            f"initial state has shape {x_k.shape}, expected ({model.state_dim},)")
    return x_k


def build_hcmpc(model, horizons, x_k):
    """Heterogeneously constrained problem at ``x_k``.

    Warns (and flags ``infeasible_start``) if ``x_k`` violates the static
    X1 predicates.
    """
    if not isinstance(horizons, HorizonPair):
        horizons = HorizonPair(*horizons)
    x_k = _check_state(model, x_k)
    N, K = horizons.N, horizons.K
    sets = (None,) + ("X1",) * (K + 1) + ("X2",) * (N - K - 1)
    res = constraint_residuals(model, x_k, "X1")
    bad = bool(res.size and np.max(res) > START_TOLERANCE)
    if bad:
        warnings.warn("initial state violates X1; solve attempted anyway",
                      RuntimeWarning, stacklevel=2)
    return OcpSpec(model, N, horizons.Ntilde, "HC", x_k, sets, bad)


def build_ucmpc(model, N, x_k):
    """Uniformly constrained problem: X2 on every predicted state."""
    if int(N) != N or N < 1:
        raise InvalidArgument(f"UC horizon must be an integer >= 1, got {N}")
    N = int(N)
    x_k = _check_state(model, x_k)
    return OcpSpec(model, N, None, "UC", x_k, (None,) + ("X2",) * N, False)


def relax_to_uniform(ocp):
    """Replace every X1 stage by X2; equals ``build_ucmpc`` on the same data."""
    sets = tuple(None if s is None else "X2" for s in ocp.stage_sets)
    return OcpSpec(ocp.model, ocp.N, None, "UC", ocp.x_k, sets, False)
