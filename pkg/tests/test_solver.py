import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcmpc.errors import InvalidArgument
from hcmpc.models import double_integrator, quadrotor6dof, scalar_test
from hcmpc.scenarios import DOUBLE_INTEGRATOR_X0, QUADROTOR_X0
from hcmpc.solver import SolverOptions, fit_warm_start, solve
from hcmpc.transcription import HorizonPair, build_hcmpc, build_ucmpc

M = scalar_test()


def uc(N, x, model=M):
    return solve(build_ucmpc(model, N, np.atleast_1d(np.asarray(x, float))))


def hc(N, Nt, x, model=M):
    return solve(build_hcmpc(model, HorizonPair(N, Nt), np.atleast_1d(np.asarray(x, float))))


def test_one_stage():
    s = uc(1, 0.4)
    assert s.ok
    assert s.value == pytest.approx(0.16, abs=1e-12)
    assert s.inputs[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_two_stage_analytic():
    s = uc(2, 0.4)
    assert s.value == pytest.approx(0.18, abs=1e-10)
    assert s.inputs[0, 0] == pytest.approx(-0.1, abs=1e-8)


def test_origin():
    for s in (uc(3, 0.0), hc(4, 2, 0.0), hc(5, 3, np.zeros(4), double_integrator())):
        assert s.value == 0.0
        assert not np.any(s.inputs)


def test_solution_fields_consistent():
    s = hc(10, 5, DOUBLE_INTEGRATOR_X0, double_integrator())
    assert s.ok and s.kind == "HC" and (s.N, s.Ntilde) == (10, 5)
    assert s.kkt_residual <= SolverOptions().kkt_tolerance
    assert s.constraint_violation <= 1e-8
    m = double_integrator()
    assert s.value == pytest.approx(sum(m.stage_cost(x, u) for x, u in zip(s.states, s.inputs)))
    for n in range(10):
        assert np.allclose(s.states[n + 1], m.dynamics(s.states[n], s.inputs[n]))


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-0.4, 0.4), N=st.integers(2, 6), data=st.data())
def test_value_monotone_in_constraints_and_horizon(x, N, data):
    Nt = data.draw(st.integers(2, N))
    v_hc = hc(N, Nt, x).value
    v_uc = uc(N, x).value
    v_uc_next = uc(N + 1, x).value
    assert v_hc >= v_uc - 1e-6 * max(1.0, v_uc)
    assert v_uc <= v_uc_next + 1e-6 * max(1.0, v_uc_next)


def test_x1_binds_on_scalar():
    # from x = 0.4 with a = 2 the unconstrained optimum leaves X1
    m = scalar_test(a=2.0, x2_bound=5.0)
    s = hc(4, 2, 0.4, m)
    assert s.ok
    assert np.all(np.abs(s.states[1:4, 0]) <= 0.4 + 1e-8)


def test_infeasible_status():
    m = scalar_test(a=2.0, u_max=0.1)
    s = hc(3, 2, 0.4, m)
    assert s.status in ("infeasible", "max_iter")
    assert s.constraint_violation > 1e-6


def test_deterministic_with_warm_start():
    m = quadrotor6dof()
    ocp = build_hcmpc(m, HorizonPair(16, 13), np.array(QUADROTOR_X0))
    s1 = solve(ocp)
    a, b = solve(ocp, s1), solve(ocp, s1)
    assert np.array_equal(a.inputs, b.inputs) and a.iterations == b.iterations


def test_fit_warm_start():
    m = scalar_test(u_max=0.5)
    U = np.array([[0.1], [0.2], [0.9]])
    assert np.allclose(fit_warm_start(U, 4, m)[:, 0], [0.2, 0.5, 0.5, 0.5])
    assert np.allclose(fit_warm_start(U, 2, m, shift=False)[:, 0], [0.1, 0.2])


def test_options_validation():
    with pytest.raises(InvalidArgument):
        SolverOptions(kkt_tolerance=0)
    with pytest.raises(InvalidArgument):
        SolverOptions(hessian_mode="bfgs")
