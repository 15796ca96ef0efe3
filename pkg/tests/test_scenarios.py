import numpy as np
import pytest

from hcmpc.errors import InvalidArgument
from hcmpc.oracle import dp_closed_loop
from hcmpc.scenarios import (ScenarioConfig, double_integrator_scenario, quadrotor_scenario,
                             run_pair, scalar_scenario, single, sweep)
from hcmpc.transcription import HorizonPair


def test_presets():
    q = quadrotor_scenario()
    assert [(p.N, p.Ntilde) for p in q.pairs] == [(16, 13), (27, 24)]
    d = double_integrator_scenario()
    assert len(d.pairs) == 8 + 18
    assert d.provenance == "full_trajectory" and d.baseline_lcss
    s = scalar_scenario(T=10)
    assert s.T == 10


def test_validation():
    with pytest.raises(InvalidArgument):
        ScenarioConfig(model="scalar_test", pairs=(), x0=(0.1,))
    with pytest.raises(InvalidArgument):
        ScenarioConfig(model="scalar_test", pairs=((3, 2), (3, 2)), x0=(0.1,))
    with pytest.raises(InvalidArgument):
        scalar_scenario(delta_method="exact")
    with pytest.raises(InvalidArgument):
        scalar_scenario(x0=(0.5,)).validate()
    with pytest.raises(InvalidArgument):
        scalar_scenario(x0=(0.1, 0.2)).validate()


@pytest.fixture(scope="module")
def scalar_rows():
    return sweep(scalar_scenario(T=60), keep_runs=True)


def test_row_count_and_order(scalar_rows):
    keys = [(r.N, r.Ntilde) for r in scalar_rows]
    assert keys == sorted(keys)
    assert len(keys) == 2 + 3 + 4
    assert not any(r.failed for r in scalar_rows)


def test_hc_value_above_uc_value(scalar_rows):
    from hcmpc.solver import solve
    from hcmpc.transcription import build_ucmpc
    m = scalar_rows[0].run.model
    for r in scalar_rows:
        v_uc = solve(build_ucmpc(m, r.N, np.array([0.4]))).value
        assert r.V >= v_uc - 1e-9


def test_sandwich_contains_oracle_cost(scalar_rows):
    checked = 0
    for r in scalar_rows:
        if r.report is None or r.report.interval is None:
            continue
        J, _, _ = dp_closed_loop(r.run.model, (r.N, r.Ntilde), [0.4], T=60)
        lo, hi = r.report.interval
        assert lo - 1e-3 <= J <= hi + 1e-3
        checked += 1
    assert checked > 0


def test_singleton_and_jobs_agree():
    cfg = scalar_scenario(pairs=((4, 2), (5, 3)), T=30)
    a = sweep(cfg, jobs=1)
    b = sweep(cfg, jobs=2)
    assert [(r.N, r.Ntilde, r.J_T, r.V) for r in a] == [(r.N, r.Ntilde, r.J_T, r.V) for r in b]
    one = single(cfg, HorizonPair(4, 2))
    assert one.J_T == a[0].J_T


def test_failure_is_isolated():
    cfg = scalar_scenario(pairs=((3, 2),), x0=(0.12,), T=20,
                          overrides={"a": 2.0, "u_max": 0.1, "x2_bound": 10.0})
    row = run_pair(cfg, HorizonPair(3, 2))
    assert row.termination == "solver_failure"


def test_value_nonincreasing_in_Ntilde(scalar_rows):
    # fewer X1 stages can only relax the problem
    for N in (4, 5, 6):
        V = [r.V for r in scalar_rows if r.N == N]
        assert np.all(np.diff(V) <= 1e-9)
