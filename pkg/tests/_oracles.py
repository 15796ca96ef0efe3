"""Independent reference implementations used to freeze expected values.

Everything here is written from the formulas directly, in exact rational
arithmetic where possible, and shares no code with the package.
"""

from fractions import Fraction as F


def series(s, m):
    total = F(0)
    for i in range(m):
        total += F(s) ** i
    return total


def alpha_explicit(N, Nt, s1, s2, delta, C1=1, C2=1):
    K = N - Nt
    s1, s2, delta = F(s1), F(s2), F(delta)
    inner = delta * series(s2, Nt) + s2 ** (Nt - 1)
    return 1 - F(C1) * F(C2) * s1 ** K * s2 * inner


def omega_explicit(N, Nt, s3, s4, nu, kappa, C3=1, C4=1):
    K = N - Nt
    s3, s4, nu, kappa = F(s3), F(s4), F(nu), F(kappa)
    inner = nu * series(s4, Nt) + s4 ** (Nt - 1)
    return F(C3) * F(C4) * kappa * s3 ** K * s4 * inner


def upper_bound(N, Nt, s1, s2, alpha, lmax, C1=1, C2=1):
    K = N - Nt
    s1, s2 = F(s1), F(s2)
    head = sum((F(C1) * s1 ** n for n in range(K + 1)), F(0))
    tail = sum((F(C1) * s1 ** K * F(C2) * s2 ** j for j in range(1, Nt)), F(0))
    return (head + tail) * F(lmax) / F(alpha)


def lower_bound(N, Nt, s3, s4, omega, kappa, lmin, C3=1, C4=1):
    K = N - Nt
    s3, s4 = F(s3), F(s4)
    head = sum((F(C3) * s3 ** n for n in range(K + 1)), F(0))
    tail = sum((F(C3) * s3 ** K * F(C4) * s4 ** j for j in range(1, Nt)), F(0))
    return F(kappa) * (head + tail) * F(lmin) / (1 - F(omega))


def delta_prop4(rho1, rho2, s2, Nt):
    return (F(rho1) + F(s2) * F(rho2)) / series(s2, Nt)


def nu_prop7(phi1, phi2, s4, Nt, C4=1):
    return (F(phi1) + F(C4) * F(s4) ** 2 * F(phi2)) / F(s4) / series(s4, Nt)


def smallest_stable_gap(s1, s2, delta, C1=1, C2=1):
    """Smallest m = N - Nt + 1 >= 0 with C1 C2 s1^m (delta/(1-s2) + 1) <= 1, by search."""
    c = F(C1) * F(C2) * (F(delta) / (1 - F(s2)) + 1)
    m = 0
    while F(s1) ** m * c > 1:
        m += 1
    return m


def smallest_omega_gap(s1, s3, ratio):
    """Smallest K >= 0 with ratio * (s3/s1)^K <= 1, by search."""
    q = F(s3) / F(s1)
    K = 0
    while F(ratio) * q ** K > 1:
        K += 1
    return K


def alpha_lcss(beta, K):
    beta = F(beta)
    return 1 - beta ** (K + 1) / (beta + 1) ** (K - 1)


def sigma_max_rates(lam, N, Nt):
    """(sigma1, sigma2) as floats from a stage-cost list, by explicit loops."""
    K = N - Nt
    r1 = [(lam[n] / lam[0]) ** (1.0 / n) for n in range(1, K + 1)]
    r2 = [(lam[n] / lam[K]) ** (1.0 / (n + 1 - K)) for n in range(K + 1, N)]
    return (max(r1) if r1 else None, max(r2) if r2 else None)
