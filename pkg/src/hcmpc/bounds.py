"""Assemble suboptimality estimates and cost bounds for a closed-loop run.

Two provenance modes are supported. ``x0_only`` takes the max-rate decay
estimates from the solve at ``x_0`` and the min-rate ones from the solve at
``x_1``. ``full_trajectory`` aggregates over every nondegenerate step: max
of ``sigma1``/``sigma2``, min of ``sigma3``/``sigma4`` and ``kappa``, max of
``delta`` and of the baseline ``beta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import suboptimality as so
from .errors import DegenerateState, Inapplicable, InvalidArgument
from .models import cost_extrema_over_inputs
from .solver import SolverOptions, solve
from .transcription import HorizonPair, build_hcmpc, build_ucmpc

PROVENANCE = ("x0_only", "full_trajectory")
DELTA_METHODS = ("heuristic", "prop4")
NU_METHODS = ("heuristic", "prop7")
AUX_VIOLATION = 1e-6


@dataclass
class BoundReport:
    """Every estimate for one ``(N, Ntilde)`` pair, with applicability reasons.

    ``alpha``/``omega`` are the closed-form indices used for the interval,
    upper and lower bounds; the online values are recorded alongside.
    """

    N: int
    Ntilde: int
    provenance: str
    V: float
    lambda0: float = None
    alpha_online: float = None
    alpha_online_min: float = None
    alpha_explicit: float = None
    alpha_lcss: float = None
    beta_lcss: float = None
    omega_online: float = None
    omega_explicit: float = None
    omega_form: str = None
    delta: float = None
    delta_raw: float = None
    delta_method: str = None
    nu: float = None
    nu_method: str = None
    kappa: float = None
    sigma1: float = None
    sigma2: float = None
    sigma3: float = None
    sigma4: float = None
    sigma_violations: list = field(default_factory=list)
    lmax: float = None
    lmin: float = None
    upper_bound: float = None
    lower_bound: float = None
    interval: tuple = None
    stability_gap: int = None
    omega_gap: int = None
    alpha_applicable: bool = False
    omega_applicable: bool = False
    reasons: dict = field(default_factory=dict)

    @property
    def alpha(self):
        return self.alpha_explicit

    @property
    def omega(self):
        return self.omega_explicit

    @property
    def K(self):
        return self.N - self.Ntilde

    def to_dict(self):
        d = asdict(self)
        d["interval"] = list(self.interval) if self.interval is not None else None
        return {k: _clean(v) for k, v in d.items()}


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return _clean(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _feasible(sol, what):
    # the value identities assume the auxiliary problem is solvable from the pivot
    if sol.status == "infeasible" or sol.constraint_violation > AUX_VIOLATION:
        raise Inapplicable(f"auxiliary {what} solve infeasible "
                           f"(violation {sol.constraint_violation:.3g})", "aux_infeasible")
    return sol


def _aux_hc(model, Nt, x, opts, warm=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ocp = build_hcmpc(model, HorizonPair(Nt, Nt), x)
    return _feasible(solve(ocp, warm, opts, shift=False), "HC")


def _aux_uc(model, n, x, opts, warm=None):
    return _feasible(solve(build_ucmpc(model, n, x), warm, opts, shift=False), "UC")


def pivot_state_s(sol, horizons):
    """``x_s = x(K+1 | x_k)``."""
    return sol.states[horizons.K + 1]


def pivot_state_p(sol_next, horizons):
    """``x_p = x(K | x_{k+1})`` from the solve at the successor state."""
    return sol_next.states[horizons.K]


def online_alpha_at(model, horizons, sol, opts=None):
    """Online index for one HC-MPC solve, or ``None`` at a degenerate state.

    Raises :class:`Inapplicable` when the auxiliary problem at ``x_s`` has
    no feasible solution (X1 not viable from ``x_s``).
    """
    opts = SolverOptions() if opts is None else opts
    lam0 = float(sol.stage_costs[0])
    if not lam0 > 0:
        return None
    K, Nt = horizons.K, horizons.Ntilde
    x_s = pivot_state_s(sol, horizons)
    aux = _aux_hc(model, Nt, x_s, opts, sol.inputs[K + 1:])
    return so.alpha_online(sol.value, aux.value, so.tail_value(sol, horizons), lam0)


def online_alpha_sequence(run, opts=None):
    """Online index at every step of a run (``nan`` where degenerate or inapplicable)."""
    out = []
    for s in run.steps:
        try:
            a = online_alpha_at(run.model, run.horizons, s.solution, opts)
        except Inapplicable:
            a = None
        out.append(np.nan if a is None else a)
    return np.array(out)


def online_omega_at(model, horizons, sol, sol_next, opts=None):
    """Online lower-bound index from consecutive solves, or ``None``."""
    opts = SolverOptions() if opts is None else opts
    lam0 = float(sol.stage_costs[0])
    if not lam0 > 0:
        return None
    K, Nt = horizons.K, horizons.Ntilde
    x_p = pivot_state_p(sol_next, horizons)
    hc = _aux_hc(model, Nt, x_p, opts, sol_next.inputs[K:])
    uc = _aux_uc(model, Nt - 1, x_p, opts, sol_next.inputs[K:])
    return so.omega_online(lam0, hc.value, uc.value)


def lcss_beta_at(model, horizons, sol, opts=None):
    """Baseline ``beta`` at the state of ``sol`` (needs ``K`` auxiliary solves)."""
    opts = SolverOptions() if opts is None else opts
    N, Nt = horizons.N, horizons.Ntilde
    x = sol.x_k
    values = {N: sol.value}
    for n in range(Nt, N):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ocp = build_hcmpc(model, HorizonPair(n, Nt), x)
        values[n] = _feasible(solve(ocp, sol.inputs, opts, shift=False), "HC").value
    costs = {}
    for n in range(Nt + 1, N + 1):
        costs[n] = float(model.stage_cost(x, sol.inputs[N - n]))
    return so.lcss_beta(values, costs, horizons)


def _safe(fn, reasons, key):
    try:
        return fn()
    except (Inapplicable, DegenerateState, InvalidArgument) as exc:
        reasons[key] = getattr(exc, "reason", None) or str(exc)
        return None


def compute_bounds(run, delta_method="heuristic", nu_method="heuristic",
                   provenance="x0_only", lcss=False, opts=None,
                   alpha_online_per_step=False):
    """Build a :class:`BoundReport` for a closed-loop run.

    Parameters
    ----------
    run : ClosedLoopRun
    delta_method : {"heuristic", "prop4"}
    nu_method : {"heuristic", "prop7"}
    provenance : {"x0_only", "full_trajectory"}
    lcss : bool
        Also compute the baseline index (``K`` extra solves per used step).
    opts : SolverOptions, optional
        Options for auxiliary solves.
    alpha_online_per_step : bool
        Record the minimum online index over all steps.
    """
    if provenance not in PROVENANCE:
        raise InvalidArgument(f"provenance must be one of {PROVENANCE}")
    if delta_method not in DELTA_METHODS:
        raise InvalidArgument(f"delta method must be one of {DELTA_METHODS}")
    if nu_method not in NU_METHODS:
        raise InvalidArgument(f"nu method must be one of {NU_METHODS}")
    opts = SolverOptions() if opts is None else opts
    hp = run.horizons
    model = run.model
    if not run.steps:
        raise InvalidArgument("run has no steps")
    sols = run.solutions
    sol0 = sols[0]
    rep = BoundReport(N=hp.N, Ntilde=hp.Ntilde, provenance=provenance,
                      V=sol0.value, delta_method=delta_method, nu_method=nu_method)
    reasons = rep.reasons
    lam0 = float(sol0.stage_costs[0])
    rep.lambda0 = lam0
    x0 = sol0.x_k
    rep.lmax = cost_extrema_over_inputs(model, x0, "max")
    rep.lmin = cost_extrema_over_inputs(model, x0, "min")
    if not lam0 > 0:
        reasons["state"] = "x0 at the origin"
        return rep

    # online indices at x0
    rep.alpha_online = _safe(lambda: online_alpha_at(model, hp, sol0, opts), reasons, "alpha_online")
    if len(sols) > 1:
        rep.omega_online = _safe(lambda: online_omega_at(model, hp, sol0, sols[1], opts),
                                 reasons, "omega_online")
    if alpha_online_per_step:
        seq = online_alpha_sequence(run, opts)
        if np.any(np.isfinite(seq)):
            rep.alpha_online_min = float(np.nanmin(seq))

    if provenance == "x0_only":
        upper_idx = [0]
        lower_idx = [1] if len(sols) > 1 else []
    else:
        upper_idx = list(range(len(sols)))
        lower_idx = list(range(1, len(sols)))

    K = hp.K
    # max-rate estimates
    s1, s2 = [], []
    for i in upper_idx:
        try:
            e = so.estimate_sigmas(sols[i], hp, "max_rates")
        except DegenerateState:
            continue
        if e.sigma1 is not None:
            s1.append(e.sigma1)
        if e.sigma2 is not None:
            s2.append(e.sigma2)
    s3, s4 = [], []
    for i in lower_idx:
        try:
            e = so.estimate_sigmas(sols[i], hp, "min_rates")
        except DegenerateState:
            continue
        if e.sigma3 is not None:
            s3.append(e.sigma3)
        if e.sigma4 is not None:
            s4.append(e.sigma4)
    est = so.DecayEstimate(
        sigma1=max(s1) if s1 else None, sigma2=max(s2) if s2 else None,
        sigma3=min(s3) if s3 else None, sigma4=min(s4) if s4 else None,
        method={"aggregate": provenance})
    est.violations = so.ordering_violations(est)
    rep.sigma1, rep.sigma2, rep.sigma3, rep.sigma4 = est.sigma1, est.sigma2, est.sigma3, est.sigma4
    rep.sigma_violations = list(est.violations)

    if not hp.explicit_ok:
        reasons["explicit"] = "closed forms need N >= 3 and Ntilde <= N-1"
    have_upper = hp.explicit_ok and est.sigma1 is not None and est.sigma2 is not None
    have_lower = hp.explicit_ok and est.sigma3 is not None and est.sigma4 is not None

    # delta
    if have_upper:
        if delta_method == "heuristic":
            d = _safe(lambda: so.delta_heuristic(est.sigma1, est.sigma2), reasons, "delta")
        else:
            ds = []
            for i in upper_idx:
                xs = pivot_state_s(sols[i], hp)
                if not np.any(xs):
                    continue
                v = _safe(lambda: so.delta_estimate("prop4", sigma2=est.sigma2, model=model,
                                                    x_s=xs, Ntilde=hp.Ntilde),
                          reasons, "delta")
                if v is not None:
                    ds.append(v)
            d = max(ds) if ds else None
        rep.delta_raw = d
        if d is not None:
            if d < 0:
                reasons["delta"] = "negative estimate replaced by 0"
            rep.delta = max(d, 0.0)

    # kappa
    ks = []
    for i in (upper_idx if provenance == "full_trajectory" else [0]):
        s = sols[i]
        v = _safe(lambda: so.kappa_estimate(model, s.x_k, s.inputs[0]), reasons, "kappa")
        if v is not None:
            ks.append(v)
    rep.kappa = min(ks) if ks else None

    # nu
    if have_lower:
        if nu_method == "heuristic":
            nu, why = so.nu_estimate("heuristic", sigma3=est.sigma3, sigma4=est.sigma4,
                                     return_reason=True)
        else:
            vals, why = [], None
            for i in lower_idx:
                xp = pivot_state_p(sols[i], hp)
                v, r = so.nu_estimate("prop7", sigma4=est.sigma4, model=model, x_p=xp,
                                      Ntilde=hp.Ntilde, return_reason=True)
                if v is None:
                    why = r
                    vals = []
                    break
                vals.append(v)
            nu = min(vals) if vals else None
        rep.nu = nu
        if nu is None:
            reasons["nu"] = why or "nu unavailable"

    # alpha and its consequences
    if have_upper and rep.delta is not None:
        rep.alpha_explicit = _safe(lambda: so.alpha_explicit(hp, est, rep.delta), reasons, "alpha")
        rep.stability_gap = _safe(lambda: so.stability_horizon_gap(est, rep.delta), reasons,
                                  "stability_gap")
        if rep.alpha_explicit is not None:
            rep.alpha_applicable = 0 < rep.alpha_explicit <= 1
            rep.upper_bound = _safe(lambda: so.cl_upper_bound(hp, est, rep.alpha_explicit, rep.lmax),
                                    reasons, "upper_bound")

    # omega and its consequences
    if have_lower and rep.kappa is not None:
        if rep.nu is not None:
            nu_used, rep.omega_form = rep.nu, "full"
        else:
            nu_used, rep.omega_form = 0.0, "reduced"
        rep.omega_explicit = _safe(lambda: so.omega_explicit(hp, est, nu_used, rep.kappa),
                                   reasons, "omega")
        if rep.omega_explicit is not None:
            rep.lower_bound = _safe(lambda: so.cl_lower_bound(hp, est, rep.omega_explicit,
                                                              rep.kappa, rep.lmin),
                                    reasons, "lower_bound")
        if rep.delta is not None and have_upper:
            rep.omega_gap = _safe(lambda: so.omega_horizon_gap(est, rep.kappa, rep.delta, nu_used),
                                  reasons, "omega_gap")

    if rep.alpha_explicit is not None and rep.omega_explicit is not None:
        a, w = rep.alpha_explicit, rep.omega_explicit
        rep.omega_applicable = 0 <= w <= 1 - a
        rep.interval = _safe(lambda: so.sandwich_interval(rep.V, a, w), reasons, "interval")
    elif "interval" not in reasons:
        reasons["interval"] = "alpha or omega unavailable"

    if lcss:
        idx = upper_idx
        betas = []
        for i in idx:
            if not sols[i].stage_costs[0] > 0:
                continue
            b = _safe(lambda: lcss_beta_at(model, hp, sols[i], opts), reasons, "lcss")
            if b is not None:
                betas.append(b)
        if betas:
            rep.beta_lcss = max(betas)
            rep.alpha_lcss = so.alpha_lcss_from_beta(rep.beta_lcss, K)
    return rep
