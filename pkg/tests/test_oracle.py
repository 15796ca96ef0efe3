import numpy as np
import pytest

from hcmpc.errors import InvalidArgument, UnsupportedConfiguration
from hcmpc.models import double_integrator, scalar_test
from hcmpc.oracle import GridSpec, default_grid, dp_closed_loop, dp_value
from hcmpc.solver import solve
from hcmpc.transcription import HorizonPair, build_hcmpc, build_ucmpc

M = scalar_test()


@pytest.fixture(scope="module")
def uc2():
    return dp_value(M, 2)


def test_two_stage_value(uc2):
    assert uc2.value([0.4]) == pytest.approx(0.18, abs=1e-3)
    assert uc2.policy([0.4])[0] == pytest.approx(-0.1, abs=0.01)


def test_origin_and_zero_stages(uc2):
    assert uc2.value([0.0]) == 0.0
    assert uc2.value([0.3], j=0) == 0.0


def test_value_nondecreasing_in_horizon():
    tabs = [dp_value(M, N) for N in range(1, 5)]
    for x in np.linspace(-0.4, 0.4, 9):
        v = [t.value([x]) for t in tabs]
        assert np.all(np.diff(v) >= -1e-12)


def test_hc_above_uc():
    uc = dp_value(M, 5)
    for Nt in range(2, 6):
        hc = dp_value(M, 5, "HCMPC", Ntilde=Nt)
        for x in np.linspace(-0.4, 0.4, 9):
            assert hc.value([x]) >= uc.value([x]) - 1e-12


@pytest.mark.parametrize("N,Nt", [(3, 2), (5, 3)])
def test_matches_solver(N, Nt):
    m = scalar_test(a=1.2, x2_bound=1.0)
    tab = dp_value(m, N, "HCMPC", Ntilde=Nt)
    for x in np.linspace(-0.4, 0.4, 7):
        s = solve(build_hcmpc(m, HorizonPair(N, Nt), np.array([x])))
        assert abs(s.value - tab.value([x])) <= 1e-3


def test_infeasible_is_inf():
    m = scalar_test(a=2.0, u_max=0.1)
    tab = dp_value(m, 3, "HCMPC", Ntilde=2)
    assert tab.value([0.4]) == np.inf
    with pytest.raises(InvalidArgument):
        tab.policy([0.4])


def test_coarse_grid_is_visibly_worse():
    coarse = GridSpec(state_n=(11,), input_n=(11,))
    fine = dp_value(M, 4)
    s = solve(build_ucmpc(M, 4, np.array([0.37])))
    assert abs(dp_value(M, 4, grid=coarse).value([0.37]) - s.value) > \
        abs(fine.value([0.37]) - s.value)


def test_closed_loop_replay():
    J, xs, us = dp_closed_loop(M, (4, 2), [0.4], T=10)
    assert xs.shape == (11, 1) and us.shape == (10, 1)
    assert J == pytest.approx(sum(x[0] ** 2 + u[0] ** 2 for x, u in zip(xs, us)))


def test_guards():
    with pytest.raises(UnsupportedConfiguration):
        dp_value(double_integrator(), 2, grid=GridSpec(state_lo=(-1,) * 4, state_hi=(1,) * 4,
                                                        state_n=(3,) * 4))
    with pytest.raises(UnsupportedConfiguration):
        default_grid(double_integrator())
    with pytest.raises(InvalidArgument):
        dp_value(M, 3, "HCMPC")
    with pytest.raises(InvalidArgument):
        dp_value(M, 3, "MPC")
    with pytest.raises(InvalidArgument):
        GridSpec(state_n=(2,))
    with pytest.raises(InvalidArgument):
        GridSpec(interpolation="cubic")
