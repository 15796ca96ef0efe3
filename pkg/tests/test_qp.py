import numpy as np
import pytest

from hcmpc.errors import InvalidArgument
from hcmpc.qp import solve_qp


def kkt_residual(H, g, A, b, res):
    z, y = res.z, res.multipliers
    stat = H @ z + g + A.T @ y
    return max(np.abs(stat).max(), np.abs(y * (A @ z - b)).max(initial=0.0))


def test_unconstrained():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    g = np.array([1.0, -1.0])
    res = solve_qp(H, g)
    assert res.status == "optimal"
    assert np.allclose(res.z, np.linalg.solve(H, -g))


def test_box_active():
    # min (z - 2)^2 subject to z <= 1
    res = solve_qp(np.array([[2.0]]), np.array([-4.0]), np.array([[1.0]]), np.array([1.0]))
    assert res.z[0] == pytest.approx(1.0)
    assert res.multipliers[0] == pytest.approx(2.0)


def test_random_convex_kkt():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n, m = rng.integers(2, 8), rng.integers(1, 12)
        M = rng.normal(size=(n, n))
        H = M @ M.T + 0.1 * np.eye(n)
        g = rng.normal(size=n)
        A = rng.normal(size=(m, n))
        z0 = rng.normal(size=n)
        b = A @ z0 + rng.uniform(0, 1, m)
        res = solve_qp(H, g, A, b)
        assert res.status == "optimal"
        assert np.all(A @ res.z - b <= 1e-9)
        assert np.all(res.multipliers >= -1e-12)
        assert kkt_residual(H, g, A, b, res) <= 1e-9


def test_infeasible():
    A = np.array([[-1.0], [1.0]])
    b = np.array([-1.0, 0.0])  # z >= 1 and z <= 0
    res = solve_qp(np.eye(1), np.zeros(1), A, b)
    assert res.status == "infeasible"
    assert res.blocking in (0, 1)


def test_shape_check():
    with pytest.raises(InvalidArgument):
        solve_qp(np.eye(2), np.zeros(3))


def test_deterministic():
    rng = np.random.default_rng(9)
    H = np.eye(4) * 2
    g = rng.normal(size=4)
    A = rng.normal(size=(6, 4))
    b = np.abs(rng.normal(size=6))
    r1, r2 = solve_qp(H, g, A, b), solve_qp(H, g, A, b)
    assert np.array_equal(r1.z, r2.z) and r1.active == r2.active
