"""Sequential quadratic programming for transcribed optimal control problems.

The states are eliminated by forward simulation (single shooting), so each
iterate satisfies the dynamics and the initial pin exactly. Each QP is in
the input correction ``dU``:

    min  0.5 dU' H dU + grad' dU
    s.t. c(U) + G dU <= 0        (state predicates, linearized)
         lb <= U + dU <= ub      (input box)

with ``H`` the Gauss-Newton Hessian, exact when the dynamics are linear and
the cost quadratic. Steps are globalized with an l1 merit line search.
Infeasible linearizations fall back to an elastic QP with penalty 1e6.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .models import cost_derivatives
from .qp import solve_qp


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and caps for :func:`solve`."""

    kkt_tolerance: float = 1e-8
    max_outer_iterations: int = 100
    backtracking: float = 0.5
    sufficient_decrease: float = 1e-4
    hessian_mode: str = "gauss_newton"
    constraint_violation_tolerance: float = 1e-8
    elastic_penalty: float = 1e6
    min_step: float = 1e-10

    def __post_init__(self):
        if not (self.kkt_tolerance > 0 and self.constraint_violation_tolerance > 0):
            raise InvalidArgument("tolerances must be positive")
        if int(self.max_outer_iterations) < 1:
            raise InvalidArgument("max_outer_iterations must be >= 1")
        if not (0 < self.backtracking < 1 and 0 < self.sufficient_decrease < 1):
            raise InvalidArgument("line-search parameters must lie in (0, 1)")
        if self.hessian_mode not in ("gauss_newton", "exact_for_quadratic"):
            raise InvalidArgument(f"unknown hessian_mode {self.hessian_mode!r}")
        if not self.elastic_penalty > 0 or not self.min_step > 0:
            raise InvalidArgument("elastic_penalty and min_step must be positive")


@dataclass
class OpenLoopSolution:
    """Optimal open-loop trajectory and diagnostics.

    ``stage_costs[n]`` is ``l(states[n], inputs[n])`` and ``value`` is their
    sum, recomputed from the array.
    """

    states: np.ndarray
    inputs: np.ndarray
    stage_costs: np.ndarray
    status: str
    kkt_residual: float
    constraint_violation: float
    kind: str
    N: int
    Ntilde: object
    x_k: np.ndarray
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def value(self):
        return float(np.sum(self.stage_costs))

    @property
    def lambdas(self):
        return self.stage_costs

    @property
    def ok(self):
        return self.status == "optimal"


def fit_warm_start(inputs, N, model, shift=True):
    """Shift a previous input sequence by one stage and fit it to length ``N``.

    The last input is repeated to pad; inputs are clipped to the box.
    """
    U = np.asarray(inputs, float).reshape(-1, model.input_dim)
    if shift and U.shape[0] > 1:
        U = np.vstack([U[1:], U[-1:]])
    if U.shape[0] >= N:
        U = U[:N]
    else:
        U = np.vstack([U, np.repeat(U[-1:], N - U.shape[0], axis=0)])
    return np.clip(U, model.input_lower, model.input_upper)


class _Linearization:
    """Values and first derivatives of cost and constraints at an input sequence."""

    def __init__(self, ocp, U, need_hessian=True):
        model = ocp.model
        N, nx, m = ocp.N, model.state_dim, model.input_dim
        nz = N * m
        X = ocp.rollout(U)
        S = np.zeros((N + 1, nx, nz))
        for n in range(N):
            A, B = model.jacobians(X[n], U[n])
            S[n + 1] = A @ S[n]
            S[n + 1][:, n * m:(n + 1) * m] += B
        grad = np.zeros(nz)
        H = np.zeros((nz, nz)) if need_hessian else None
        lam = np.empty(N)
        for n in range(N):
            lam[n] = float(model.stage_cost(X[n], U[n]))
            gx, gu, Hxx, Hxu, Huu = cost_derivatives(model.stage_cost, X[n], U[n])
            sl = slice(n * m, (n + 1) * m)
            grad += S[n].T @ gx
            grad[sl] += gu
            if need_hessian:
                Sn = S[n]
                H += Sn.T @ Hxx @ Sn
                C = Sn.T @ Hxu
                H[:, sl] += C
                H[sl, :] += C.T
                H[sl, sl] += Huu
        rows_c, rows_G, labels = [], [], []
        for n in range(1, N + 1):
            for p in ocp.predicates(n):
                if p.coupled:
                    c = p(X[n - 1], X[n])
                    Jp, Jn = p.jacobian(X[n - 1], X[n])
                    G = Jp @ S[n - 1] + Jn @ S[n]
                else:
                    c = p(X[n])
                    G = p.jacobian(X[n]) @ S[n]
                rows_c.append(np.asarray(c, float))
                rows_G.append(G)
                labels.extend((n, p.name, i) for i in range(p.size))
        self.X, self.U, self.S = X, U, S
        self.lam = lam
        self.J = float(np.sum(lam))
        self.grad = grad
        self.H = H
        self.c = np.concatenate(rows_c) if rows_c else np.zeros(0)
        self.G = np.vstack(rows_G) if rows_G else np.zeros((0, nz))
        self.labels = labels
        lo = np.tile(model.input_lower, N)
        hi = np.tile(model.input_upper, N)
        self.lo, self.hi = lo, hi
        u = U.reshape(-1)
        self.box_viol = float(max(np.max(u - hi, initial=0.0), np.max(lo - u, initial=0.0)))
        self.viol = float(max(np.max(self.c, initial=0.0), self.box_viol))
        self.l1 = float(np.sum(np.maximum(self.c, 0.0)))


def _values(ocp, U):
    X = ocp.rollout(U)
    lam = ocp.stage_costs(X, U)
    c = ocp.residuals(X)
    return float(np.sum(lam)), float(np.sum(np.maximum(c, 0.0)))


def _kkt(lin, mult_c, mult_hi, mult_lo, grad_scale, cost_scale):
    u = lin.U.reshape(-1)
    stat = lin.grad + lin.G.T @ mult_c + mult_hi - mult_lo
    comp = 0.0
    if mult_c.size:
        comp = float(np.max(np.abs(mult_c * lin.c)))
    fin_hi = np.isfinite(lin.hi)
    fin_lo = np.isfinite(lin.lo)
    if np.any(fin_hi):
        comp = max(comp, float(np.max(np.abs(mult_hi[fin_hi] * (u - lin.hi)[fin_hi]))))
    if np.any(fin_lo):
        comp = max(comp, float(np.max(np.abs(mult_lo[fin_lo] * (lin.lo - u)[fin_lo]))))
    return max(float(np.max(np.abs(stat), initial=0.0)) / grad_scale, comp / cost_scale)


def _qp_step(lin, Hreg, opts):
    """Solve the SQP subproblem; returns (dU, mult_c, mult_hi, mult_lo, elastic, slack)."""
    nz = lin.grad.size
    u = lin.U.reshape(-1)
    eye = np.eye(nz)
    fin_hi = np.isfinite(lin.hi)
    fin_lo = np.isfinite(lin.lo)
    Abox = np.vstack([eye[fin_hi], -eye[fin_lo]])
    bbox = np.concatenate([(lin.hi - u)[fin_hi], (u - lin.lo)[fin_lo]])
    mc = lin.c.size
    A = np.vstack([lin.G, Abox])
    b = np.concatenate([-lin.c, bbox])
    res = solve_qp(Hreg, lin.grad, A, b)
    elastic = False
    slack = np.zeros(mc)
    if res.status != "optimal" and mc:
        elastic = True
        rho = opts.elastic_penalty
        eps = 1e-6
        He = np.zeros((nz + mc, nz + mc))
        He[:nz, :nz] = Hreg
        He[nz:, nz:] = eps * np.eye(mc)
        ge = np.concatenate([lin.grad, rho * np.ones(mc)])
        Ae = np.vstack([
            np.hstack([lin.G, -np.eye(mc)]),
            np.hstack([np.zeros((mc, nz)), -np.eye(mc)]),
            np.hstack([Abox, np.zeros((Abox.shape[0], mc))]),
        ])
        be = np.concatenate([-lin.c, np.zeros(mc), bbox])
        res = solve_qp(He, ge, Ae, be)
        if res.status != "optimal":
            return None
        slack = res.z[nz:]
        dU = res.z[:nz]
        mult_c = res.multipliers[:mc]
        mult_box = res.multipliers[2 * mc:]
    elif res.status != "optimal":
        return None
    else:
        dU = res.z
        mult_c = res.multipliers[:mc]
        mult_box = res.multipliers[mc:]
    mult_hi = np.zeros(nz)
    mult_lo = np.zeros(nz)
    nh = int(np.sum(fin_hi))
    mult_hi[fin_hi] = mult_box[:nh]
    mult_lo[fin_lo] = mult_box[nh:]
    return dU, mult_c, mult_hi, mult_lo, elastic, slack


def _regularize(H):
    H = 0.5 * (H + H.T)
    try:
        np.linalg.cholesky(H)
        return H
    except np.linalg.LinAlgError:
        pass
    scale = max(1.0, float(np.max(np.abs(np.diag(H)), initial=1.0)))
    w = np.linalg.eigvalsh(H)
    shift = max(0.0, -float(w[0])) + 1e-8 * scale
    return H + shift * np.eye(H.shape[0])


def solve(ocp, warm_start=None, opts=None, shift=True):
    """Solve an :class:`~hcmpc.transcription.OcpSpec` to local optimality.

    Parameters
    ----------
    ocp : OcpSpec
    warm_start : OpenLoopSolution or array, optional
        Previous solution (or input array); shifted by one stage when
        ``shift`` is true, then truncated or padded to length ``N``.
    opts : SolverOptions, optional
    shift : bool

    Returns
    -------
    OpenLoopSolution
    """
    opts = SolverOptions() if opts is None else opts
    model = ocp.model
    N, m = ocp.N, model.input_dim
    if warm_start is None:
        U = np.clip(np.zeros((N, m)), model.input_lower, model.input_upper)
    else:
        prev = warm_start.inputs if isinstance(warm_start, OpenLoopSolution) else warm_start
        U = fit_warm_start(prev, N, model, shift=shift)

    lin = _Linearization(ocp, U)
    grad_scale = max(1.0, float(np.max(np.abs(lin.grad), initial=0.0)))
    cost_scale = max(1.0, lin.J)
    pen = 0.0
    mults = None
    kkt = np.inf
    elastic_used = False
    status = "max_iter"
    it = 0
    slack = np.zeros(lin.c.size)
    while True:
        if mults is not None:
            kkt = _kkt(lin, *mults, grad_scale, cost_scale)
            if kkt <= opts.kkt_tolerance and lin.viol <= opts.constraint_violation_tolerance:
                status = "optimal"
                break
        if it >= opts.max_outer_iterations:
            break
        Hreg = _regularize(lin.H)
        step = _qp_step(lin, Hreg, opts)
        it += 1
        if step is None:
            status = "infeasible"
            break
        dU, mc, mhi, mlo, elastic, slack = step
        elastic_used |= elastic
        mults = (mc, mhi, mlo)
        if mc.size:
            pen = max(pen, 1.1 * float(np.max(mc)) + 1e-12)
        du = dU.reshape(N, m)
        small = float(np.max(np.abs(dU), initial=0.0)) <= 1e-14 * (1.0 + float(np.max(np.abs(U))))
        if small:
            kkt = _kkt(lin, *mults, grad_scale, cost_scale)
            if lin.viol <= opts.constraint_violation_tolerance:
                status = "optimal" if kkt <= max(opts.kkt_tolerance, 1e-9) else "max_iter"
            else:
                status = "infeasible"
            break
        lin_l1 = float(np.sum(np.maximum(lin.c + lin.G @ dU, 0.0)))
        D = float(lin.grad @ dU) + pen * (lin_l1 - lin.l1)
        phi0 = lin.J + pen * lin.l1
        t = 1.0
        accepted = False
        while t >= opts.min_step:
            Ut = np.clip(U + t * du, model.input_lower, model.input_upper)
            Jt, l1t = _values(ocp, Ut)
            if Jt + pen * l1t <= phi0 + opts.sufficient_decrease * t * min(D, 0.0) + 1e-15 * abs(phi0):
                accepted = True
                break
            t *= opts.backtracking
        if not accepted:
            # no merit decrease along the QP direction: treat as stationary
            kkt = _kkt(lin, *mults, grad_scale, cost_scale)
            if lin.viol <= opts.constraint_violation_tolerance and kkt <= 1e3 * opts.kkt_tolerance:
                status = "optimal"
            elif lin.viol > opts.constraint_violation_tolerance and elastic:
                status = "infeasible"
            break
        U = Ut
        lin = _Linearization(ocp, U)

    X = lin.X
    lam = lin.lam
    diagnostics = {
        "elastic_used": bool(elastic_used),
        "infeasible_start": bool(ocp.infeasible_start),
        "penalty": pen,
    }
    if lin.c.size and lin.viol > opts.constraint_violation_tolerance:
        i = int(np.argmax(lin.c))
        n, name, row = lin.labels[i]
        diagnostics["most_violated"] = {"stage": int(n), "predicate": name,
                                        "row": int(row), "value": float(lin.c[i])}
        if status == "optimal":
            status = "infeasible"
    if mults is not None and not np.isfinite(kkt):
        kkt = _kkt(lin, *mults, grad_scale, cost_scale)
    return OpenLoopSolution(
        states=X, inputs=lin.U.copy(), stage_costs=lam, status=status,
        kkt_residual=float(kkt), constraint_violation=float(lin.viol),
        kind=ocp.kind, N=N, Ntilde=ocp.Ntilde, x_k=ocp.x_k.copy(),
        iterations=it, diagnostics=diagnostics)
