import numpy as np
import pytest

from hcmpc.closed_loop import run, tail_from_costs, truncated_cost
from hcmpc.errors import InvalidArgument
from hcmpc.models import double_integrator, scalar_test, step
from hcmpc.oracle import dp_closed_loop
from hcmpc.scenarios import DOUBLE_INTEGRATOR_X0
from hcmpc.transcription import HorizonPair


def test_tail_geometric():
    J, tail, rho = tail_from_costs([1, 0.5, 0.25, 0.125, 0.0625])
    assert J == pytest.approx(1.9375, abs=1e-12)
    assert rho == pytest.approx(0.5, abs=1e-12)
    assert tail == pytest.approx(0.0625, abs=1e-12)


def test_tail_edge_cases():
    assert tail_from_costs([0.0] * 6)[:2] == (0.0, 0.0)
    assert tail_from_costs([2.0])[:2] == (2.0, 2.0)
    with pytest.raises(InvalidArgument):
        tail_from_costs([])


def test_origin_run():
    r = run(scalar_test(), HorizonPair(4, 2), [0.0], T=50)
    assert len(r.steps) == 1
    assert r.J_T == 0.0
    assert r.termination == "converged"


@pytest.fixture(scope="module")
def scalar_run():
    return run(scalar_test(), HorizonPair(4, 2), [0.4], T=50)


def test_run_invariants(scalar_run):
    r = scalar_run
    m = r.model
    assert r.J_T == pytest.approx(np.sum(r.stage_costs), rel=1e-15)
    assert truncated_cost(r) == (r.J_T, r.tail_estimate)
    for k, s in enumerate(r.steps):
        assert np.array_equal(s.input, s.solution.inputs[0])
        assert np.array_equal(r.states[k + 1], step(m, s.state, s.input))
    assert r.values[0] <= r.J_T + r.tail_estimate


def test_last_quartile_decreasing(scalar_run):
    c = scalar_run.stage_costs
    q = c[3 * len(c) // 4:]
    assert np.all(np.diff(q) <= 1e-9)


def test_matches_dp_policy(scalar_run):
    J, _, _ = dp_closed_loop(scalar_run.model, (4, 2), [0.4], T=50)
    assert abs(scalar_run.J_T - J) <= 1e-3


def test_double_integrator_stays_safe():
    r = run(double_integrator(), HorizonPair(10, 5), DOUBLE_INTEGRATOR_X0, T=80)
    assert r.termination in ("converged", "horizon_reached")
    assert r.safety_margin >= -1e-9
    m = r.model
    assert min(np.min(m.safety_margins(x)) for x in r.states) >= -1e-9


def test_solver_failure_truncates():
    # a = 2, u_max = 0.1: states above the fixed point 0.1 drift out of X1
    m = scalar_test(a=2.0, u_max=0.1, x2_bound=10.0)
    r = run(m, HorizonPair(3, 2), [0.12], T=20)
    assert r.termination == "solver_failure"
    assert r.diagnostics["failure"]["k"] == len(r.steps) == 2
    assert len(r.states) == len(r.steps) + 1


def test_negative_T():
    with pytest.raises(InvalidArgument):
        run(scalar_test(), (3, 2), [0.1], T=-1)
