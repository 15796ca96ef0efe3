"""Suboptimality indices and closed-loop cost bounds.

Notation: ``K = N - Nt`` for horizons ``(N, Nt)``; ``lam`` is the optimal
stage-cost sequence of an HC-MPC solve; ``x_s = x(K+1 | x_k)`` and
``x_p = x(K | x_{k+1})`` are the pivot states.

Geometric factors ``(1 - s**m)/(1 - s)`` are evaluated as the finite sum
they stand for, so ``s = 1`` yields ``m``; estimates outside the intended
ranges are flagged, not clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateState, Inapplicable, InvalidArgument
from .models import (cost_extrema_over_inputs, min_cost_after_one_step,
                     stage_cost, step)
from .transcription import HorizonPair

_CEIL_SLACK = 1e-9
# cost minima below this fraction of the maximum are numerical zeros
_ZERO_REL = 1e-12


def geom(s, m):
    """``sum_{i<m} s**i``, i.e. ``(1 - s**m)/(1 - s)`` with the limit at ``s = 1``."""
    if m <= 0:
        return 0.0
    if s == 1.0:
        return float(m)
    return (1.0 - s**m) / (1.0 - s)


def _ceil(x):
    # guard against log-ratio roundoff such as log(4)/log(2) = 2.0000000000000004
    return int(math.ceil(x - _CEIL_SLACK * max(1.0, abs(x))))


def _hp(horizons):
    return horizons if isinstance(horizons, HorizonPair) else HorizonPair(*horizons)


def _nonneg(name, v):
    if v is None or not np.isfinite(v) or v < 0:
        raise InvalidArgument(f"{name} must be a finite nonnegative number, got {v}")


# --------------------------------------------------------------------------
# decay rates
# --------------------------------------------------------------------------


@dataclass
class DecayEstimate:
    """Decay-rate envelope of the optimal stage costs.

    ``sigma1``/``sigma2`` bound the decay from above (slowest observed),
    ``sigma3``/``sigma4`` from below (fastest observed). Entries not
    estimated are ``None``. ``violations`` lists broken orderings.
    """

    sigma1: float = None
    sigma2: float = None
    sigma3: float = None
    sigma4: float = None
    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    C4: float = 1.0
    method: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def valid(self):
        return not self.violations

    def merged(self, other):
        """Combine max-rate fields of ``self`` with min-rate fields of ``other``."""
        out = DecayEstimate(self.sigma1, self.sigma2, other.sigma3, other.sigma4,
                            self.C1, self.C2, other.C3, other.C4,
                            {**self.method, **other.method})
        out.violations = ordering_violations(out)
        return out


def ordering_violations(est):
    """Broken intended orderings ``1 > s1 > s2 >= 0``, ``s1 >= s3 > s4 >= 0``, ``s2 >= s4``."""
    v = []
    s1, s2, s3, s4 = est.sigma1, est.sigma2, est.sigma3, est.sigma4
    if s1 is not None and s1 >= 1:
        v.append("sigma1>=1")
    if s2 is not None and s2 >= 1:
        v.append("sigma2>=1")
    if s3 is not None and s3 >= 1:
        v.append("sigma3>=1")
    if s4 is not None and s4 >= 1:
        v.append("sigma4>=1")
    if s1 is not None and s2 is not None and not s1 > s2:
        v.append("sigma1<=sigma2")
    if s3 is not None and s4 is not None and not s3 > s4:
        v.append("sigma3<=sigma4")
    if s1 is not None and s3 is not None and not s1 >= s3:
        v.append("sigma1<sigma3")
    if s2 is not None and s4 is not None and not s2 >= s4:
        v.append("sigma2<sigma4")
    return v


def sigma_rates(lam, horizons):
    """Per-index ratios ``(r1, r2)`` behind the decay-rate estimates.

    ``r1[n-1] = (lam[n]/lam[0])**(1/n)`` for ``n = 1..K`` and
    ``r2[j] = (lam[n]/lam[K])**(1/(n+1-K))`` for ``n = K+1..N-1``.
    """
    hp = _hp(horizons)
    lam = np.asarray(lam, float)
    if lam.shape != (hp.N,):
        raise InvalidArgument(f"expected {hp.N} stage costs, got {lam.shape}")
    K = hp.K
    if lam[0] <= 0:
        raise DegenerateState("lambda(0) is zero")
    r1 = np.array([(lam[n] / lam[0]) ** (1.0 / n) for n in range(1, K + 1)])
    if K + 1 <= hp.N - 1:
        if lam[K] <= 0:
            raise DegenerateState(f"lambda({K}) is zero")
        r2 = np.array([(lam[n] / lam[K]) ** (1.0 / (n + 1 - K))
                       for n in range(K + 1, hp.N)])
    else:
        r2 = np.zeros(0)
    return r1, r2


def estimate_sigmas(sol, horizons, mode):
    """Decay rates from one HC-MPC solve, with all ``C`` set to 1.

    ``mode="max_rates"`` gives ``sigma1, sigma2`` (maxima of the ratios);
    ``mode="min_rates"`` gives ``sigma3, sigma4`` (minima), intended for the
    solve at the successor state.
    """
    hp = _hp(horizons)
    lam = sol.stage_costs if hasattr(sol, "stage_costs") else np.asarray(sol, float)
    r1, r2 = sigma_rates(lam, hp)
    a = float(np.max(r1)) if r1.size else None
    b = float(np.max(r2)) if r2.size else None
    if mode == "max_rates":
        est = DecayEstimate(sigma1=a, sigma2=b,
                            method={"sigma1": "max_ratio", "sigma2": "max_ratio"})
    elif mode == "min_rates":
        a = float(np.min(r1)) if r1.size else None
        b = float(np.min(r2)) if r2.size else None
        est = DecayEstimate(sigma3=a, sigma4=b,
                            method={"sigma3": "min_ratio", "sigma4": "min_ratio"})
    else:
        raise InvalidArgument(f"unknown mode {mode!r}")
    est.violations = ordering_violations(est)
    return est


# --------------------------------------------------------------------------
# alpha (upper bound side)
# --------------------------------------------------------------------------


def tail_value(sol, horizons):
    """``sum_{n=K+1}^{N-1} lam(n)`` of an HC-MPC solve; equals ``V_{Nt-1}(x_s)``."""
    hp = _hp(horizons)
    if getattr(sol, "kind", "HC") != "HC" or sol.N != hp.N or sol.Ntilde != hp.Ntilde:
        raise InvalidArgument(
            f"solution metadata ({sol.kind}, N={sol.N}, Nt={sol.Ntilde}) does not "
            f"match horizons (N={hp.N}, Nt={hp.Ntilde})")
    return math.fsum(float(v) for v in sol.stage_costs[hp.K + 1:hp.N])


def alpha_online(V_NNt_xk, V_NtNt_xs, V_Ntm1_xs, lambda0):
    """``1 - (V_Nt^Nt(x_s) - V_{Nt-1}(x_s))/lambda0``; may be negative."""
    if not lambda0 > 0:
        raise DegenerateState("lambda0 must be positive (state at the origin?)")
    return 1.0 - (V_NtNt_xs - V_Ntm1_xs) / lambda0


def alpha_explicit(horizons, est, delta):
    """Closed-form suboptimality index from decay rates and ``delta``."""
    hp = _hp(horizons)
    hp.require_explicit()
    s1, s2 = est.sigma1, est.sigma2
    _nonneg("sigma1", s1)
    _nonneg("sigma2", s2)
    _nonneg("delta", delta)
    if s2 == 0.0:
        return 1.0
    K, Nt = hp.K, hp.Ntilde
    return 1.0 - est.C1 * est.C2 * s1**K * s2 * (delta * geom(s2, Nt) + s2 ** (Nt - 1))


def delta_heuristic(sigma1, sigma2):
    """``sigma1/sigma2 - 1`` (not a rigorous bound)."""
    if sigma2 is None or sigma2 == 0:
        raise Inapplicable("heuristic delta needs sigma2 > 0", "sigma2_zero")
    return sigma1 / sigma2 - 1.0


def delta_prop4(rho1, rho2, sigma2, Ntilde):
    """``(rho1 + sigma2 rho2)(1 - sigma2)/(1 - sigma2**Nt)``."""
    if rho1 < 0 or rho2 < 0:
        raise Inapplicable("prop4 needs rho1, rho2 >= 0", "rho_negative")
    if not (0 < sigma2 < 1):
        raise Inapplicable("prop4 needs 0 < sigma2 < 1", "sigma2_range")
    if Ntilde < 2:
        raise InvalidArgument("Ntilde must be >= 2")
    return (rho1 + sigma2 * rho2) / geom(sigma2, Ntilde)


def delta_rho_terms(model, x_s):
    """``(rho1, rho2)`` at the pivot ``x_s`` from cost extrema over the input box."""
    lmax = cost_extrema_over_inputs(model, x_s, "max")
    lmin = cost_extrema_over_inputs(model, x_s, "min")
    lnext = min_cost_after_one_step(model, x_s)
    if lmin <= _ZERO_REL * lmax:
        raise DegenerateState("min_u l(x_s, u) is zero")
    if lnext <= _ZERO_REL * lmax:
        raise Inapplicable("min over two stages of l(f(x_s,u1),u2) is zero",
                           "rho2_unbounded")
    return lmax / lmin - 1.0, lmax / lnext - 1.0


def delta_estimate(method, sigma1=None, sigma2=None, model=None, x_s=None,
                   Ntilde=None):
    """Gap ``delta`` between X1- and X2-constrained stage costs."""
    if method == "heuristic":
        return delta_heuristic(sigma1, sigma2)
    if method == "prop4":
        if x_s is None or not np.any(np.asarray(x_s)):
            raise DegenerateState("prop4 needs x_s != 0")
        rho1, rho2 = delta_rho_terms(model, np.asarray(x_s, float))
        return delta_prop4(rho1, rho2, sigma2, Ntilde)
    raise InvalidArgument(f"unknown delta method {method!r}")


def stability_horizon_gap(est, delta):
    """Smallest ``N - Nt + 1`` for which the closed-form index is nonnegative."""
    s1, s2 = est.sigma1, est.sigma2
    _nonneg("delta", delta)
    _nonneg("sigma1", s1)
    _nonneg("sigma2", s2)
    if s1 >= 1:
        raise Inapplicable("stability gap needs sigma1 < 1", "sigma1_ge_1")
    if s2 >= 1:
        raise Inapplicable("stability gap needs sigma2 < 1", "sigma2_ge_1")
    if s2 > s1:
        raise Inapplicable("stability gap needs sigma2 <= sigma1", "sigma1_lt_sigma2")
    c = est.C1 * est.C2
    if c < 1:
        raise InvalidArgument("C1*C2 must be >= 1")
    arg = c * (delta / (1.0 - s2) + 1.0)
    if s1 == 0:
        return 0
    return max(0, _ceil(math.log(arg) / math.log(1.0 / s1)))


def cl_upper_bound(horizons, est, alpha, lmax):
    """Upper bound on the infinite-horizon closed-loop cost."""
    hp = _hp(horizons)
    if not alpha > 0:
        raise Inapplicable("upper bound needs alpha > 0", "alpha_nonpositive")
    _nonneg("lmax", lmax)
    s1, s2 = est.sigma1, est.sigma2
    _nonneg("sigma1", s1)
    _nonneg("sigma2", s2)
    K, Nt = hp.K, hp.Ntilde
    brk = geom(s1, K + 1) + est.C2 * s1**K * s2 * geom(s2, Nt - 1)
    return est.C1 * brk * lmax / alpha


# --------------------------------------------------------------------------
# omega (lower bound side)
# --------------------------------------------------------------------------


def omega_online(lambda0, V_NtNt_xp, V_Ntm1_xp):
    """``(V_Nt^Nt(x_p) - V_{Nt-1}(x_p))/lambda0``; negative means a suboptimal solve."""
    if not lambda0 > 0:
        raise DegenerateState("lambda0 must be positive (state at the origin?)")
    return (V_NtNt_xp - V_Ntm1_xp) / lambda0


def omega_explicit(horizons, est, nu, kappa):
    """Closed-form lower-bound index from decay rates, ``nu`` and ``kappa``."""
    hp = _hp(horizons)
    hp.require_explicit()
    s3, s4 = est.sigma3, est.sigma4
    _nonneg("sigma3", s3)
    _nonneg("sigma4", s4)
    _nonneg("nu", nu)
    _nonneg("kappa", kappa)
    if s4 == 0.0 or kappa == 0.0:
        return 0.0
    K, Nt = hp.K, hp.Ntilde
    return est.C3 * est.C4 * kappa * s3**K * s4 * (nu * geom(s4, Nt) + s4 ** (Nt - 1))


def kappa_estimate(model, x_k, u0_star):
    """``l(f(x_k, u0), 0) / l(x_k, u0)``."""
    den = stage_cost(model, x_k, u0_star)
    if not den > 0:
        raise DegenerateState("l(x_k, u0) is zero")
    x1 = step(model, x_k, u0_star)
    return stage_cost(model, x1, np.zeros(model.input_dim)) / den


def nu_heuristic(sigma3, sigma4):
    """``sigma3/sigma4 - 1`` (not a rigorous bound)."""
    if sigma4 is None or sigma4 == 0:
        raise Inapplicable("heuristic nu needs sigma4 > 0", "sigma4_zero")
    return sigma3 / sigma4 - 1.0


def nu_prop7(phi1, phi2, sigma4, Ntilde, C4=1.0):
    """``(phi1 + C4 sigma4^2 phi2)/sigma4 * (1 - sigma4)/(1 - sigma4**Nt)``."""
    if phi1 < 0 or phi2 < 0:
        raise Inapplicable("prop7 inapplicable: phi1 or phi2 is negative",
                           "prop7 inapplicable")
    if not (0 < sigma4 < 1):
        raise Inapplicable("prop7 needs 0 < sigma4 < 1", "sigma4_range")
    if not C4 > 0:
        raise InvalidArgument("C4 must be positive")
    if Ntilde < 2:
        raise InvalidArgument("Ntilde must be >= 2")
    return (phi1 + C4 * sigma4**2 * phi2) / sigma4 / geom(sigma4, Ntilde)


def nu_phi_terms(model, x_p):
    """``(phi1, phi2)`` at the pivot ``x_p``."""
    lmax = cost_extrema_over_inputs(model, x_p, "max")
    lmin = cost_extrema_over_inputs(model, x_p, "min")
    lnext = min_cost_after_one_step(model, x_p)
    if lmin <= _ZERO_REL * lmax or lnext <= _ZERO_REL * lmax:
        # phi -> -inf in the limit, so this nu estimate does not apply
        raise Inapplicable("prop7 inapplicable: zero cost minimum at x_p",
                           "prop7 inapplicable")
    return 1.0 - lmax / lmin, 1.0 - lmax / lnext


def nu_estimate(method, sigma3=None, sigma4=None, model=None, x_p=None,
                Ntilde=None, C4=1.0, return_reason=False):
    """Gap ``nu`` for the lower bound; ``None`` when it does not exist.

    With ``return_reason`` the result is ``(value, reason)``.
    """
    value, reason = None, None
    try:
        if method == "heuristic":
            value = nu_heuristic(sigma3, sigma4)
            if value < 0:
                value, reason = None, "heuristic nu negative"
        elif method == "prop7":
            if x_p is None or not np.any(np.asarray(x_p)):
                raise DegenerateState("prop7 needs x_p != 0")
            phi1, phi2 = nu_phi_terms(model, np.asarray(x_p, float))
            value = nu_prop7(phi1, phi2, sigma4, Ntilde, C4)
        else:
            raise InvalidArgument(f"unknown nu method {method!r}")
    except Inapplicable as exc:
        value, reason = None, exc.reason
    return (value, reason) if return_reason else value


def omega_horizon_gap(est, kappa, delta, nu):
    """Smallest ``N - Nt`` for which ``0 <= omega <= 1 - alpha`` (closed forms)."""
    s1, s2, s3, s4 = est.sigma1, est.sigma2, est.sigma3, est.sigma4
    _nonneg("kappa", kappa)
    if s4 == 0 or kappa == 0:
        return 0
    for name, v in (("sigma1", s1), ("sigma2", s2), ("sigma3", s3), ("sigma4", s4),
                    ("delta", delta), ("nu", nu)):
        _nonneg(name, v)
    if not s1 > s3:
        raise Inapplicable("omega gap needs sigma1 > sigma3", "sigma1_le_sigma3")
    if not s2 >= s4:
        raise Inapplicable("omega gap needs sigma2 >= sigma4", "sigma2_lt_sigma4")
    if not delta >= nu:
        raise Inapplicable("delta < nu gives only an implicit horizon condition",
                           "delta_lt_nu")
    if s3 == 0:
        return 0
    ratio = est.C3 * est.C4 * kappa / (est.C1 * est.C2)
    return max(0, _ceil(math.log(ratio) / math.log(s1 / s3)))


def cl_lower_bound(horizons, est, omega, kappa, lmin):
    """Lower bound on the infinite-horizon closed-loop cost."""
    hp = _hp(horizons)
    if not omega < 1:
        raise Inapplicable("lower bound needs omega < 1", "omega_ge_1")
    _nonneg("lmin", lmin)
    _nonneg("kappa", kappa)
    s3, s4 = est.sigma3, est.sigma4
    _nonneg("sigma3", s3)
    _nonneg("sigma4", s4)
    K, Nt = hp.K, hp.Ntilde
    brk = geom(s3, K + 1) + est.C4 * s3**K * s4 * geom(s4, Nt - 1)
    return est.C3 * kappa * brk * lmin / (1.0 - omega)


# --------------------------------------------------------------------------
# sandwich, comparison, baseline, relaxed dynamic programming
# --------------------------------------------------------------------------


def sandwich_interval(V, alpha, omega):
    """``(V/(1 - omega), V/alpha)`` for ``alpha in (0, 1]`` and ``omega in [0, 1 - alpha]``."""
    if not (0 < alpha <= 1):
        raise Inapplicable(f"alpha={alpha} outside (0, 1]", "alpha_range")
    if not (0 <= omega <= 1 - alpha):
        raise Inapplicable(f"omega={omega} outside [0, 1 - alpha]", "omega_range")
    return (V / (1.0 - omega), V / alpha)


@dataclass(frozen=True)
class Verdict:
    verdict: str        # "Ntilde2 worse" or "inconclusive"
    reason: str = ""


def compare_horizons(report1, report2):
    """Decide whether the larger constraint horizon is certainly worse.

    Both reports need ``N``, ``Ntilde``, ``V``, ``alpha`` and ``omega``
    attributes. Equal constraint horizons are always inconclusive.
    """
    if report1.N != report2.N:
        return Verdict("inconclusive", "different prediction horizons")
    if report2.Ntilde < report1.Ntilde:
        return compare_horizons(report2, report1)
    if report2.Ntilde == report1.Ntilde:
        return Verdict("inconclusive", "same constraint horizon")
    a1, w2 = report1.alpha, report2.omega
    if a1 is None or not (0 < a1 <= 1):
        return Verdict("inconclusive", "alpha of the first report not applicable")
    if w2 is None or not (0 <= w2 < 1):
        return Verdict("inconclusive", "omega of the second report not applicable")
    upper1 = report1.V / a1
    lower2 = report2.V / (1.0 - w2)
    if upper1 <= lower2:
        return Verdict("Ntilde2 worse", f"{upper1!r} <= {lower2!r}")
    return Verdict("inconclusive", f"{upper1!r} > {lower2!r}")


def lcss_beta(values, costs, horizons):
    """Smallest ``beta >= 0`` satisfying the baseline's two conditions.

    ``values[n]`` is ``V_n^Nt(x_k)`` for ``n = Nt..N``; ``costs[n]`` is
    ``l(x_k, u_h(N-n | x_k))`` for ``n = Nt+1..N``.
    """
    hp = _hp(horizons)
    Nt, N = hp.Ntilde, hp.N
    ratios = []
    if values[Nt] <= 0:
        raise DegenerateState("V_Nt^Nt(x_k) is zero")
    if N >= Nt + 1:
        ratios.append(values[Nt + 1] / values[Nt])
    for n in range(Nt + 1, N + 1):
        if costs[n] <= 0:
            raise DegenerateState(f"l(x_k, u(N-{n})) is zero")
        ratios.append(values[n] / costs[n])
    if not ratios:
        return 0.0
    return max(0.0, max(ratios) - 1.0)


def alpha_lcss_from_beta(beta, K):
    """``1 - beta**(K+1)/(beta+1)**(K-1)``."""
    _nonneg("beta", beta)
    return 1.0 - beta ** (K + 1) / (beta + 1.0) ** (K - 1)


def alpha_lcss(values, costs, horizons):
    """Baseline suboptimality index; see :func:`lcss_beta` for the inputs."""
    hp = _hp(horizons)
    return alpha_lcss_from_beta(lcss_beta(values, costs, hp), hp.K)


@dataclass
class RDPResult:
    alpha_pass: np.ndarray
    omega_pass: object = None

    @property
    def all_pass(self):
        ok = bool(np.all(self.alpha_pass))
        if self.omega_pass is not None:
            ok = ok and bool(np.all(self.omega_pass))
        return ok


def rdp_check(run, alpha, omega=None, rel_tol=1e-8):
    """Per-step relaxed dynamic programming inequalities.

    ``alpha``/``omega`` may be scalars or per-step arrays. Step ``k`` is
    checked for every ``k`` that has a successor solve.
    """
    V = run.values
    lam = run.stage_costs
    n = max(len(V) - 1, 0)
    alpha = np.broadcast_to(np.asarray(alpha, float), (len(V),))
    Vk, Vn, lk = V[:n], V[1:n + 1], lam[:n]
    tol = rel_tol * np.maximum(1.0, Vk)
    a = alpha[:n]
    apass = Vk >= Vn + a * lk - tol
    opass = None
    if omega is not None:
        omega = np.broadcast_to(np.asarray(omega, float), (len(V),))[:n]
        with np.errstate(divide="ignore", invalid="ignore"):
            rhs = a / (1.0 - omega) * (Vk - Vn)
        opass = a * lk >= rhs - tol
    return RDPResult(apass, opass)
