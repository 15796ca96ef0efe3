"""Dense strictly convex QP by the dual active-set method of Goldfarb and Idnani.

Solves ``min 0.5 z'Hz + g'z  s.t.  A z <= b`` with ``H`` positive definite.
The QR factorization of ``L^{-1} N`` (``H = L L'``, ``N`` the active
constraint normals) is updated with rank-one column inserts and deletes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, qr, qr_delete, qr_insert, solve_triangular

from .errors import InvalidArgument


@dataclass
class QPResult:
    z: np.ndarray
    multipliers: np.ndarray   # one per row of A, zero for inactive rows
    active: list
    status: str               # "optimal", "infeasible" or "max_iter"
    iterations: int
    blocking: int = -1        # row that could not be added when infeasible


def solve_qp(H, g, A=None, b=None, feas_tol=1e-12, max_iter=None):
    """Goldfarb-Idnani dual active-set solve.

    Parameters
    ----------
    H : (n, n) array, symmetric positive definite.
    g : (n,) array.
    A : (m, n) array, optional.
    b : (m,) array, optional.
    feas_tol : float
        Scaled violation below which a constraint counts as satisfied.
    max_iter : int, optional
        Cap on constraint additions plus deletions.

    Returns
    -------
    QPResult
    """
    H = np.asarray(H, float)
    g = np.asarray(g, float)
    n = g.size
    if H.shape != (n, n):
        raise InvalidArgument("H and g have inconsistent shapes")
    if A is None:
        A = np.zeros((0, n))
        b = np.zeros(0)
    A = np.asarray(A, float).reshape(-1, n)
    b = np.asarray(b, float).reshape(A.shape[0])
    m = A.shape[0]
    if max_iter is None:
        max_iter = 20 * (m + n) + 100

    try:
        c, _ = cho_factor(0.5 * (H + H.T), lower=True)
    except np.linalg.LinAlgError:
        raise InvalidArgument("QP Hessian is not positive definite") from None
    L = np.tril(c)
    Linv = solve_triangular(L, np.eye(n), lower=True)

    z = -Linv.T @ (Linv @ g)
    row_norm = np.linalg.norm(A, axis=1)
    active = []
    u = np.zeros(0)
    Q = np.eye(n)
    R = np.zeros((n, 0))
    it = 0

    def add_column(Q, R, v, q):
        if q == 0:
            return qr(v.reshape(n, 1))
        return qr_insert(Q, R, v, q, which="col")

    def drop_column(Q, R, k, q):
        if q == 1:
            return np.eye(n), np.zeros((n, 0))
        return qr_delete(Q, R, k, 1, which="col")

    while True:
        s = b - A @ z
        scale = feas_tol * (1.0 + np.max(np.abs(z), initial=0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            viol = np.where(row_norm > 0, -s / np.where(row_norm > 0, row_norm, 1.0),
                            np.where(s < 0, np.inf, -np.inf))
        if active:
            viol[active] = -np.inf
        p = int(np.argmax(viol)) if m else -1
        if m == 0 or viol[p] <= scale:
            lam = np.zeros(m)
            lam[active] = u
            return QPResult(z, lam, list(active), "optimal", it)
        if row_norm[p] == 0:
            lam = np.zeros(m)
            lam[active] = u
            return QPResult(z, lam, list(active), "infeasible", it, blocking=p)

        npv = -A[p]
        u_plus = np.append(u, 0.0)
        while True:
            it += 1
            q = len(active)
            if it > max_iter:
                lam = np.zeros(m)
                lam[active] = u_plus[:q]
                return QPResult(z, lam, list(active), "max_iter", it)
            v = Linv @ npv
            d = Q.T @ v
            d2 = d[q:]
            if q:
                r = solve_triangular(R[:q, :q], d[:q], lower=False)
            else:
                r = np.zeros(0)
            t1, k = np.inf, -1
            for j in range(q):
                if r[j] > 0:
                    tj = u_plus[j] / r[j]
                    if tj < t1:
                        t1, k = tj, j
            dn = float(d2 @ d2)
            if dn <= (1e-14 * float(v @ v)) or dn == 0.0:
                t2 = np.inf
                zdir = None
            else:
                zdir = Linv.T @ (Q[:, q:] @ d2)
                sp = b[p] - A[p] @ z
                t2 = max(-sp, 0.0) / dn
            t = min(t1, t2)
            if not np.isfinite(t):
                lam = np.zeros(m)
                lam[active] = u_plus[:q]
                return QPResult(z, lam, list(active), "infeasible", it, blocking=p)
            if zdir is not None:
                z = z + t * zdir
            u_plus[:q] -= t * r
            u_plus[q] += t
            if t2 <= t1:
                Q, R = add_column(Q, R, v, q)
                active.append(p)
                u = u_plus
                break
            Q, R = drop_column(Q, R, k, q)
            del active[k]
            u_plus = np.delete(u_plus, k)
            u_plus[:-1] = np.maximum(u_plus[:-1], 0.0)
