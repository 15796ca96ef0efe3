"""System models: dynamics, stage cost, input box and the two state-constraint sets.

Constraint predicates follow the convention ``g(x) <= 0`` means feasible.
A predicate may be *coupled*, in which case it is evaluated on a pair of
consecutive predicted states ``(x_prev, x_next)``; this is how barrier-type
decrease conditions are expressed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .errors import InvalidArgument, UnsupportedConfiguration

_CS_STEP = 1e-30


# --------------------------------------------------------------------------
# predicates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Predicate:
    """Vector-valued smooth constraint map, feasible where every entry is <= 0.

    Parameters
    ----------
    fun : callable
        ``fun(x)`` or, when ``coupled``, ``fun(x_prev, x_next)``; returns a
        1-D array of length ``size``. Must accept complex input if no
        ``jac`` is supplied (Jacobians then use the complex-step method).
    size : int
        Number of scalar inequalities.
    jac : callable, optional
        ``jac(x)`` -> ``(size, n)`` array, or for coupled predicates
        ``jac(x_prev, x_next)`` -> ``(J_prev, J_next)``.
    coupled : bool
        Whether the predicate links two consecutive states.
    name : str
    affine : tuple, optional
        ``(C, d)`` when the predicate is ``C x + d``; enables vectorized use.
    """

    fun: Callable
    size: int
    jac: Optional[Callable] = None
    coupled: bool = False
    name: str = ""
    affine: Optional[tuple] = None

    def __call__(self, *xs):
        return np.asarray(self.fun(*xs)).reshape(self.size)

    def jacobian(self, *xs):
        if self.jac is not None:
            out = self.jac(*xs)
            if self.coupled:
                return (np.asarray(out[0], float).reshape(self.size, -1),
                        np.asarray(out[1], float).reshape(self.size, -1))
            return np.asarray(out, float).reshape(self.size, -1)
        if self.coupled:
            a, b = (np.asarray(v, float) for v in xs)
            ja = _complex_step(lambda z: self.fun(z, b), a, self.size)
            jb = _complex_step(lambda z: self.fun(a, z), b, self.size)
            return ja, jb
        return _complex_step(self.fun, np.asarray(xs[0], float), self.size)


def linear_predicate(C, d, name=""):
    """Predicate ``C x + d <= 0``."""
    C = np.atleast_2d(np.asarray(C, float))
    d = np.asarray(d, float).reshape(C.shape[0])
    return Predicate(fun=lambda x: C @ x + d, size=C.shape[0],
                     jac=lambda x: C, name=name, affine=(C, d))


def coupled_linear_predicate(C_prev, C_next, d, name=""):
    """Predicate ``C_prev x_prev + C_next x_next + d <= 0``."""
    Cp = np.atleast_2d(np.asarray(C_prev, float))
    Cn = np.atleast_2d(np.asarray(C_next, float))
    d = np.asarray(d, float).reshape(Cp.shape[0])
    return Predicate(fun=lambda a, b: Cp @ a + Cn @ b + d, size=Cp.shape[0],
                     jac=lambda a, b: (Cp, Cn), coupled=True, name=name)


def abs_bound_predicate(index, bound, state_dim, name=""):
    """|x[i]| <= bound for each i in ``index``, as two linear rows per entry."""
    index = np.atleast_1d(index)
    C = np.zeros((2 * len(index), state_dim))
    for r, i in enumerate(index):
        C[2 * r, i] = 1.0
        C[2 * r + 1, i] = -1.0
    d = -float(bound) * np.ones(2 * len(index))
    return linear_predicate(C, d, name=name)


def _complex_step(fun, x, m):
    x = np.asarray(x, float)
    n = x.size
    J = np.empty((m, n))
    for i in range(n):
        xc = x.astype(complex)
        xc[i] += 1j * _CS_STEP
        J[:, i] = np.imag(np.asarray(fun(xc)).reshape(m)) / _CS_STEP
    return J


# --------------------------------------------------------------------------
# stage cost
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticCost:
    """``l(x, u) = x'Qx + u'Ru``."""

    Q: np.ndarray
    R: np.ndarray

    def __call__(self, x, u):
        return x @ self.Q @ x + u @ self.R @ u

    def derivatives(self, x, u):
        """Gradient and Hessian blocks ``(gx, gu, Hxx, Hxu, Huu)``."""
        return (2.0 * self.Q @ x, 2.0 * self.R @ u, 2.0 * self.Q,
                np.zeros((self.Q.shape[0], self.R.shape[0])), 2.0 * self.R)


def cost_derivatives(cost, x, u):
    """Gradient/Hessian blocks of a stage cost.

    Quadratic costs are exact; other callables use complex-step gradients
    and a forward difference of the gradient for the Hessian, projected to
    the positive semidefinite cone.
    """
    if hasattr(cost, "derivatives"):
        return cost.derivatives(x, u)
    nx, nu = x.size, u.size
    z = np.concatenate([x, u])

    def grad(zz):
        return _complex_step(lambda w: np.atleast_1d(cost(w[:nx], w[nx:])), zz, 1)[0]

    g = grad(z)
    H = np.empty((nx + nu, nx + nu))
    h = 1e-6 * max(1.0, float(np.max(np.abs(z))))
    for i in range(nx + nu):
        zp = z.copy()
        zp[i] += h
        H[:, i] = (grad(zp) - g) / h
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    H = (V * np.maximum(w, 0.0)) @ V.T
    return g[:nx], g[nx:], H[:nx, :nx], H[:nx, nx:], H[nx:, nx:]


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Discrete-time system with stage cost, input box and sets X1, X2.

    ``linear`` optionally holds ``(A, B)`` for affine-free linear dynamics;
    ``dynamics_jacobian`` optionally returns ``(A, B)`` at a point.
    ``safety`` maps a state to a vector of margins, nonnegative when safe;
    it defaults to the negated X1 state predicates.
    """

    state_dim: int
    input_dim: int
    dynamics: Callable
    stage_cost: Callable
    input_lower: np.ndarray
    input_upper: np.ndarray
    x1_constraints: tuple = ()
    x2_constraints: tuple = ()
    sample_time: float = 1.0
    name: str = "custom"
    linear: Optional[tuple] = None
    dynamics_jacobian: Optional[Callable] = None
    safety: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.state_dim) < 1 or int(self.input_dim) < 1:
            raise InvalidArgument("state_dim and input_dim must be positive")
        lo = np.asarray(self.input_lower, float).reshape(self.input_dim)
        hi = np.asarray(self.input_upper, float).reshape(self.input_dim)
        if np.any(lo > hi):
            raise InvalidArgument("input box has lower > upper")
        object.__setattr__(self, "input_lower", lo)
        object.__setattr__(self, "input_upper", hi)
        object.__setattr__(self, "x1_constraints", tuple(self.x1_constraints))
        object.__setattr__(self, "x2_constraints", tuple(self.x2_constraints))
        if any(p.coupled for p in self.x2_constraints):
            raise InvalidArgument("coupled predicates are only supported in X1")

    @property
    def quadratic(self):
        return isinstance(self.stage_cost, QuadraticCost)

    def jacobians(self, x, u):
        """``(df/dx, df/du)`` at ``(x, u)``."""
        if self.linear is not None:
            return self.linear
        if self.dynamics_jacobian is not None:
            return self.dynamics_jacobian(x, u)
        nx = self.state_dim
        A = _complex_step(lambda z: self.dynamics(z, u), x, nx)
        B = _complex_step(lambda z: self.dynamics(x, z), u, nx)
        return A, B

    def safety_margins(self, x):
        if self.safety is not None:
            return np.atleast_1d(np.asarray(self.safety(x), float))
        return -constraint_residuals(self, x, "X1")


def _as_state(model, x):
    x = np.asarray(x, float)
    if x.shape != (model.state_dim,):
        raise InvalidArgument(
            f"state has shape {x.shape}, expected ({model.state_dim},)")
    return x


def _as_input(model, u):
    u = np.asarray(u, float)
    if u.shape != (model.input_dim,):
        raise InvalidArgument(
            f"input has shape {u.shape}, expected ({model.input_dim},)")
    return u


def step(model, x, u):
    """One-step transition ``f(x, u)``."""
    x = _as_state(model, x)
    u = _as_input(model, u)
    return np.asarray(model.dynamics(x, u), float)


def stage_cost(model, x, u):
    """Running cost ``l(x, u)``."""
    x = _as_state(model, x)
    u = _as_input(model, u)
    return float(model.stage_cost(x, u))


def constraint_residuals(model, x, which, x_prev=None):
    """Stacked predicate values of set ``which`` (``"X1"`` or ``"X2"``) at ``x``.

    Coupled predicates are included only when ``x_prev`` is given.
    """
    x = _as_state(model, x)
    if which == "X1":
        preds = model.x1_constraints
    elif which == "X2":
        preds = model.x2_constraints
    else:
        raise InvalidArgument(f"unknown constraint set {which!r}")
    if x_prev is not None:
        x_prev = _as_state(model, x_prev)
    out = []
    for p in preds:
        if p.coupled:
            if x_prev is not None:
                out.append(p(x_prev, x))
        else:
            out.append(p(x))
    if not out:
        return np.zeros(0)
    return np.concatenate(out).astype(float)


def _box_vertices(lo, hi):
    return np.array(list(itertools.product(*zip(lo, hi))), float)


def cost_extrema_over_inputs(model, x, mode, samples=5):
    """Max or min of ``l(x, .)`` over the input box.

    Quadratic costs are handled exactly: the maximum of the convex input
    term sits at a box vertex, the minimum is ``x'Qx`` when the box holds 0.
    Other costs use a ``samples``-per-axis grid refined by L-BFGS-B.
    """
    x = _as_state(model, x)
    lo, hi = model.input_lower, model.input_upper
    m = model.input_dim
    if mode not in ("max", "min"):
        raise InvalidArgument(f"mode must be 'max' or 'min', got {mode!r}")
    cost = model.stage_cost
    if isinstance(cost, QuadraticCost):
        R = cost.R
        xq = float(x @ cost.Q @ x)
        if mode == "min":
            if np.all(lo <= 0) and np.all(hi >= 0):
                return xq
            res = minimize(lambda u: u @ R @ u, np.clip(0.0, lo, hi),
                           jac=lambda u: 2 * R @ u, method="L-BFGS-B",
                           bounds=list(zip(lo, hi)))
            return xq + float(res.fun)
        if m <= 8:
            V = _box_vertices(lo, hi)
            return xq + float(np.max(np.einsum("ij,jk,ik->i", V, R, V)))
        if np.allclose(R, np.diag(np.diag(R))):
            return xq + float(np.sum(np.diag(R) * np.maximum(lo**2, hi**2)))
        raise UnsupportedConfiguration(
            "input_dim > 8 with non-diagonal R is not supported")
    return _sampled_extremum(lambda u: float(cost(x, u)), lo, hi, mode, samples)


def _sampled_extremum(fun, lo, hi, mode, samples=5, refine=3):
    sign = 1.0 if mode == "min" else -1.0
    axes = [np.linspace(a, b, samples) for a, b in zip(lo, hi)]
    pts = np.array(list(itertools.product(*axes)), float)
    vals = np.array([sign * fun(p) for p in pts])
    best = float(np.min(vals))
    for i in np.argsort(vals, kind="stable")[:refine]:
        res = minimize(lambda u: sign * fun(u), pts[i], method="L-BFGS-B",
                       bounds=list(zip(lo, hi)))
        best = min(best, float(res.fun))
    return sign * best


def min_cost_after_one_step(model, x, samples=5):
    """``min over u1, u2 of l(f(x, u1), u2)``, by grid multi-start plus L-BFGS-B."""
    x = _as_state(model, x)
    lo, hi = model.input_lower, model.input_upper

    def inner(u1):
        return cost_extrema_over_inputs(model, step(model, x, np.asarray(u1, float)),
                                        "min", samples)
    return _sampled_extremum(inner, lo, hi, "min", samples)


# --------------------------------------------------------------------------
# builtin systems
# --------------------------------------------------------------------------


def scalar_test(a=0.5, b=1.0, q=1.0, r=1.0, u_max=1.0, x1_bound=0.4,
                x2_bound=1.0):
    """``x+ = a x + b u`` with ``l = q x^2 + r u^2``, X1 = {|x| <= x1_bound}."""
    A = np.array([[float(a)]])
    B = np.array([[float(b)]])
    x1 = (abs_bound_predicate([0], x1_bound, 1, name="abs_x"),)
    x2 = ()
    if x2_bound is not None and np.isfinite(x2_bound):
        x2 = (abs_bound_predicate([0], x2_bound, 1, name="abs_x"),)
    return ModelSpec(
        state_dim=1, input_dim=1,
        dynamics=lambda x, u: A @ x + B @ u,
        stage_cost=QuadraticCost(np.array([[float(q)]]), np.array([[float(r)]])),
        input_lower=[-u_max], input_upper=[u_max],
        x1_constraints=x1, x2_constraints=x2, sample_time=1.0,
        name="scalar_test", linear=(A, B),
        params=dict(a=a, b=b, q=q, r=r, u_max=u_max, x1_bound=x1_bound,
                    x2_bound=x2_bound))


def double_integrator_matrices(h):
    """Zero-order-hold discretization of a planar double integrator."""
    Ac = np.zeros((4, 4))
    Ac[0, 2] = Ac[1, 3] = 1.0
    Bc = np.zeros((4, 2))
    Bc[2, 0] = Bc[3, 1] = 1.0
    M = np.zeros((6, 6))
    M[:4, :4] = Ac
    M[:4, 4:] = Bc
    E = expm(M * h)
    return E[:4, :4], E[:4, 4:]


def di_barriers():
    """Affine barrier functions ``h(x) = c'x + c0`` of the planar scenario."""
    c1 = np.array([5.0 / 9.0, 1.0, 0.0, 0.0])
    c2 = np.array([1.0, -1.0, 0.0, 0.0])
    return [(c1, 0.5 / 9.0), (c2, 1.6)]


def double_integrator(h=0.1, q=1.0, r=0.1, u_max=2.0, v_max=2.0, gamma=0.8,
                      barriers=None):
    """Planar double integrator, state ``(px, py, vx, vy)``.

    X1 holds the velocity diamond ``|vx| + |vy| <= v_max`` and, for each
    affine barrier ``h``, the coupled decrease condition
    ``(1 - gamma) h(x_prev) - h(x_next) <= 0``.
    """
    A, B = double_integrator_matrices(float(h))
    barriers = di_barriers() if barriers is None else barriers
    V = np.array([[0, 0, s1, s2] for s1 in (1.0, -1.0) for s2 in (1.0, -1.0)])
    preds = [linear_predicate(V, -float(v_max) * np.ones(4), name="velocity")]
    for i, (c, c0) in enumerate(barriers, start=1):
        c = np.asarray(c, float)
        preds.append(coupled_linear_predicate(
            (1.0 - gamma) * c[None, :], -c[None, :], [-gamma * c0],
            name=f"cbf_h{i}"))

    def safety(x):
        return np.array([c @ x + c0 for c, c0 in barriers])

    n = 4
    return ModelSpec(
        state_dim=n, input_dim=2,
        dynamics=lambda x, u: A @ x + B @ u,
        stage_cost=QuadraticCost(float(q) * np.eye(n), float(r) * np.eye(2)),
        input_lower=-float(u_max) * np.ones(2),
        input_upper=float(u_max) * np.ones(2),
        x1_constraints=tuple(preds), x2_constraints=(), sample_time=float(h),
        name="double_integrator", linear=(A, B), safety=safety,
        params=dict(h=h, q=q, r=r, u_max=u_max, v_max=v_max, gamma=gamma))


QUADROTOR_OBSTACLE = (0.4, 1.5, -0.2)


def quadrotor_continuous(x, u, m=1.0, g=9.81, Ix=0.01, Iy=0.01, Iz=0.02):
    """Small-angle rigid-body vector field; ``u = (f_t, tau_x, tau_y, tau_z)``."""
    _, _, _, ph, th, ps, vu, vv, vw, p, q, r = x
    ft, tx, ty, tz = u
    return np.array([
        vw * (ph * ps + th) - vv * (ps - ph * th) + vu,
        vv * (1 + ph * ps * th) - vw * (ph - ps * th) + vu * ps,
        vw - vu * th + vv * ph,
        p + r * th + q * ph * th,
        q - r * ph,
        r + q * ph,
        r * vv - q * vw - g * th,
        p * vw - r * vu + g * ph,
        q * vu - p * vv + g - ft / m,
        (Iy - Iz) / Ix * r * q + tx / Ix,
        (Iz - Ix) / Iy * p * r + ty / Iy,
        (Ix - Iy) / Iz * p * q + tz / Iz,
    ])


def quadrotor6dof(h=0.4, m=1.0, g=9.81, Ix=0.01, Iy=0.01, Iz=0.02,
                  u_max=(15.0, 1.0, 1.0, 1.0), q_pos=10.0, q_rest=1.0, r=0.1,
                  obstacle=QUADROTOR_OBSTACLE, r_obs=0.5, eps=0.1,
                  angle_max=np.pi / 9, speed_max=2.0, rate_max=np.pi / 18):
    """Quadrotor discretized by forward Euler.

    The model input is the thrust deviation from hover, ``f_t - m g``, so
    the origin with zero input is an equilibrium of zero cost.
    """
    h = float(h)
    hover = float(m) * float(g)
    pars = dict(m=m, g=g, Ix=Ix, Iy=Iy, Iz=Iz)
    u_max = np.asarray(u_max, float).reshape(4)
    obstacle = np.asarray(obstacle, float).reshape(3)

    def dyn(x, u):
        uu = u + np.array([hover, 0.0, 0.0, 0.0])
        return x + h * quadrotor_continuous(x, uu, **pars)

    def dist(x):
        d = x[:3] - obstacle
        return np.array([r_obs**2 + eps - d @ d])

    def dist_jac(x):
        J = np.zeros((1, 12))
        J[0, :3] = -2.0 * (x[:3] - obstacle)
        return J

    def speed(x):
        v = x[6:9]
        return np.array([v @ v - speed_max**2])

    def speed_jac(x):
        J = np.zeros((1, 12))
        J[0, 6:9] = 2.0 * x[6:9]
        return J

    ground = np.zeros((1, 12))
    ground[0, 2] = 1.0
    preds = (
        Predicate(dist, 1, dist_jac, name="distance"),
        linear_predicate(ground, [0.0], name="ground"),
        abs_bound_predicate([3, 4, 5], angle_max, 12, name="attitude"),
        Predicate(speed, 1, speed_jac, name="speed"),
        abs_bound_predicate([9, 10, 11], rate_max, 12, name="rate"),
    )
    Q = np.diag(np.r_[q_pos * np.ones(3), q_rest * np.ones(9)])
    return ModelSpec(
        state_dim=12, input_dim=4, dynamics=dyn,
        stage_cost=QuadraticCost(Q, float(r) * np.eye(4)),
        input_lower=-u_max, input_upper=u_max,
        x1_constraints=preds, x2_constraints=(), sample_time=h,
        name="quadrotor6dof",
        safety=lambda x: np.array([np.sqrt((x[:3] - obstacle) @ (x[:3] - obstacle)) - r_obs]),
        params=dict(h=h, m=m, g=g, Ix=Ix, Iy=Iy, Iz=Iz, u_max=tuple(u_max),
                    q_pos=q_pos, q_rest=q_rest, r=r, obstacle=tuple(obstacle),
                    r_obs=r_obs, eps=eps, angle_max=angle_max,
                    speed_max=speed_max, rate_max=rate_max))


BUILTIN_MODELS = {
    "scalar_test": scalar_test,
    "double_integrator": double_integrator,
    "quadrotor6dof": quadrotor6dof,
}


def make_model(identifier, **overrides):
    """Instantiate a builtin model by identifier with keyword overrides."""
    try:
        factory = BUILTIN_MODELS[identifier]
    except KeyError:
        raise InvalidArgument(
            f"unknown model {identifier!r}; choose from {sorted(BUILTIN_MODELS)}") from None
    try:
        return factory(**overrides)
    except TypeError as exc:
        raise InvalidArgument(f"bad override for {identifier}: {exc}") from None
