"""Acceptance criteria, one test each; a summary line per criterion is printed at the end."""

import filecmp
import math
import time

import numpy as np
import pytest

from hcmpc import suboptimality as so
from hcmpc.bounds import compute_bounds, online_alpha_sequence, pivot_state_s
from hcmpc.cli import cmd_sweep, oracle_checks
from hcmpc.config import load_config
from hcmpc.scenarios import (double_integrator_scenario, quadrotor_scenario, scalar_scenario,
                             sweep)
from hcmpc.solver import solve
from hcmpc.transcription import HorizonPair, build_ucmpc

from . import _oracles as orc
from .test_suboptimality import TOL, est as e

CONFIGS = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"


def detail(record, text):
    record("detail", text)


@pytest.fixture(scope="session")
def di_rows():
    """Double-integrator sweeps at N = 10 and 20, full-trajectory, with the baseline."""
    return sweep(double_integrator_scenario(), keep_runs=True)


@pytest.fixture(scope="session")
def di10_rows(di_rows):
    return [r for r in di_rows if r.N == 10]


@pytest.fixture(scope="session")
def scalar_rows():
    return sweep(scalar_scenario(), keep_runs=True)


@pytest.fixture(scope="session")
def quad_row():
    cfg = quadrotor_scenario(pairs=((16, 13),), delta_method="prop4", nu_method="prop7")
    (row,) = sweep(cfg, keep_runs=True)
    return row


@pytest.mark.criterion(1, "oracle equivalence")
def test_oracle_equivalence(record_property):
    t = time.perf_counter()
    cfg = load_config(CONFIGS / "scalar.ini")
    assert (cfg.oracle.N_max, cfg.oracle.samples) == (6, 20)
    _, records = oracle_checks(cfg)
    values = [r for r in records if r[0] in ("value_uc", "value_hc")]
    assert {r[1] for r in values} == set(range(1, 7))
    worst = max(r[4] for r in values)
    elapsed = time.perf_counter() - t
    detail(record_property, f"{len(values)} values, worst {worst:.2e}, {elapsed:.1f} s")
    assert worst <= 1e-3
    assert max(r[4] for r in records) <= 1e-3
    assert elapsed < 120


@pytest.mark.criterion(2, "tail equality")
def test_tail_equality(record_property, scalar_rows, di10_rows):
    worst, n = 0.0, 0
    for row in scalar_rows + di10_rows:
        assert not row.failed
        hp = HorizonPair(row.N, row.Ntilde)
        model = row.run.model
        for sol in row.run.solutions:
            x_s = pivot_state_s(sol, hp)
            ref = solve(build_ucmpc(model, hp.Ntilde - 1, x_s)).value
            err = abs(so.tail_value(sol, hp) - ref) / max(1.0, sol.value)
            worst = max(worst, err)
            n += 1
    detail(record_property, f"{n} solves, worst relative {worst:.1e}")
    assert worst <= 1e-6


def _rdp(row):
    alpha = online_alpha_sequence(row.run)
    steps = len(alpha) - 1
    ok = np.isfinite(alpha[:steps])
    res = so.rdp_check(row.run, np.where(np.isfinite(alpha), alpha, 0.0))
    return int(ok.sum()), int((~ok).sum()), bool(np.all(res.alpha_pass[ok]))


@pytest.mark.criterion(3, "RDP consistency")
def test_rdp_consistency(record_property, scalar_rows, di10_rows, quad_row):
    checked = skipped = 0
    bad = []
    for row in scalar_rows + di10_rows + [quad_row]:
        assert row.termination in ("converged", "horizon_reached")
        c, s, ok = _rdp(row)
        checked, skipped = checked + c, skipped + s
        if not ok:
            bad.append((row.N, row.Ntilde))
    detail(record_property, f"{checked} steps checked, {skipped} without an online alpha, "
                            f"failing rows {bad}")
    assert not bad
    assert checked > 0


@pytest.mark.criterion(4, "sandwich containment")
def test_sandwich_containment(record_property, di10_rows):
    used = []
    for row in di10_rows:
        rep = compute_bounds(row.run, provenance="x0_only")
        a, w = rep.alpha, rep.omega
        if a is None or w is None or not (0 < a <= 1) or not (0 <= w <= 1 - a):
            continue
        J, tail, V = row.J_T, row.run.tail_estimate, rep.V
        assert V / (1 - w) - tail <= J, (row.Ntilde, V / (1 - w), J)
        assert J + tail <= V / a * (1 + 1e-6), (row.Ntilde, J, V / a)
        used.append(row.Ntilde)
    detail(record_property, f"rows with applicable indices: Ntilde {used}")
    assert used


def _crossing(rows, key):
    ks = [r.N - r.Ntilde for r in rows if getattr(r.report, key) is not None
          and getattr(r.report, key) >= 0]
    return min(ks) if ks else math.inf


@pytest.mark.criterion(5, "baseline dominance")
def test_baseline_dominance(record_property, di_rows):
    t = time.perf_counter()
    msgs = []
    for N in (10, 20):
        rows = [r for r in di_rows if r.N == N]
        assert rows and all(r.report is not None for r in rows)
        assert all(r.report.provenance == "full_trajectory" for r in rows)
        for r in rows:
            assert r.report.alpha_explicit is not None and r.report.alpha_lcss is not None
            assert r.report.alpha_explicit >= r.report.alpha_lcss, (N, r.Ntilde)
        c1, c2 = _crossing(rows, "alpha_explicit"), _crossing(rows, "alpha_lcss")
        assert c1 <= c2
        msgs.append(f"N={N}: crossings {c1} vs {c2}")
    detail(record_property, "; ".join(msgs))
    assert time.perf_counter() - t < 600


@pytest.mark.criterion(6, "quadrotor safety")
def test_quadrotor_safety(record_property, quad_row):
    run = quad_row.run
    obs = np.array(run.model.params["obstacle"])
    dist = float(np.min(np.linalg.norm(run.states[:, :3] - obs, axis=1)))
    rep = quad_row.report
    assert dist > 0.5
    assert rep.lower_bound is not None
    assert rep.lower_bound <= run.J_T
    msg = f"min distance {dist:.4f}, lower {rep.lower_bound:.2f} <= J_T {run.J_T:.2f}"
    if rep.alpha is not None and rep.alpha > 0:
        assert run.J_T + run.tail_estimate <= rep.upper_bound
        msg += f" <= upper {rep.upper_bound:.2f}"
    else:
        msg += f", upper N.A. ({rep.reasons.get('upper_bound', 'alpha <= 0')})"
    detail(record_property, msg)


def _derived_values():
    """Reference examples of the closed forms, recomputed by the package."""
    return [
        (so.alpha_explicit((4, 2), e(0.5, 0.25), 0.0), 0.984375),
        (so.alpha_explicit((4, 2), e(0.5, 0.25), 0.5), 0.9453125),
        (so.alpha_online(2.0, 0.3, 0.1, 1.0), 0.8),
        (so.alpha_online(2.0, 0.3, 0.1, 0.1), -1.0),
        (so.delta_prop4(0.5, 1.0, 0.5, 2), 2 / 3),
        (so.stability_horizon_gap(e(0.5, 0.5), 1.5), 2),
        (so.stability_horizon_gap(e(0.9, 0.5), 0.5), 7),
        (so.cl_upper_bound((4, 2), e(0.5, 0.25), 0.5, 1.0), 3.625),
        (so.omega_online(1.0, 0.15, 0.1), 0.05),
        (so.omega_explicit((4, 2), e(s3=0.4, s4=0.1), 0.2, 1.0), 0.00512),
        (so.nu_prop7(0.5, 0.2, 0.5, 2), 1.1 * 2 / 3),
        (so.omega_horizon_gap(e(0.5, 0.25, 0.4, 0.1), 2.0, 0.5, 0.2), 4),
        (so.cl_lower_bound((4, 2), e(s3=0.4, s4=0.1), 0.0, 1.0, 1.0), 1.576),
        (so.sandwich_interval(100.0, 0.5, 0.2)[0], 125.0),
        (so.sandwich_interval(100.0, 0.5, 0.2)[1], 200.0),
        (so.alpha_lcss_from_beta(1.0, 2), 0.5),
        (so.alpha_lcss_from_beta(2.0, 1), -3.0),
        (float(orc.alpha_explicit(4, 2, 0.5, 0.25, 0.5)), 0.9453125),
        (float(orc.upper_bound(4, 2, 0.5, 0.25, 0.5, 1)), 3.625),
        (float(orc.lower_bound(4, 2, 0.4, 0.1, 0, 1, 1)), 1.576),
    ]


@pytest.mark.criterion(7, "closed-form properties")
def test_closed_form_properties(record_property):
    t = time.perf_counter()
    rng = np.random.default_rng(20261016)
    n = 1000
    for _ in range(n):
        s1 = rng.uniform(0.05, 0.95)
        s2 = rng.uniform(0.0, s1)
        s3 = s1 * rng.uniform(0.05, 0.95)
        s4 = s2 * rng.uniform(0.0, 1.0)
        delta = rng.uniform(0.0, 5.0)
        nu = delta * rng.uniform(0.0, 1.0)
        kappa = rng.uniform(0.0, 4.0)
        Nt = int(rng.integers(2, 12))
        est = so.DecayEstimate(s1, s2, s3, s4)

        N = Nt + int(rng.integers(1, 30))
        a0 = so.alpha_explicit(HorizonPair(N, Nt), est, delta)
        a1 = so.alpha_explicit(HorizonPair(N + 1, Nt), est, delta)
        assert a1 >= a0 - 1e-12

        m = so.stability_horizon_gap(est, delta)
        Ns = Nt + max(m - 1, 1)
        assert so.alpha_explicit(HorizonPair(Ns, Nt), est, delta) >= -1e-12

        K = max(so.omega_horizon_gap(est, kappa, delta, nu), 1)
        hp = HorizonPair(Nt + K, Nt)
        w = so.omega_explicit(hp, est, nu, kappa)
        assert 0 <= w <= 1 - so.alpha_explicit(hp, est, delta) + 1e-12
    derived = _derived_values()
    for got, want in derived:
        assert abs(got - want) <= TOL, (got, want)
    elapsed = time.perf_counter() - t
    detail(record_property, f"{n} tuples, {len(derived)} reference values, {elapsed:.2f} s")
    assert elapsed < 10


@pytest.mark.criterion(8, "determinism")
def test_determinism(record_property, tmp_path):
    base = load_config(CONFIGS / "double_integrator_n10.ini")
    from dataclasses import replace
    outs = []
    for name in ("first", "second"):
        cfg = replace(base, out_dir=str(tmp_path / name))
        cmd_sweep(cfg)
        outs.append(tmp_path / name)
    names = ("sweep.csv", "plot_alpha_bounds.csv")
    for f in names:
        assert filecmp.cmp(outs[0] / f, outs[1] / f, shallow=False), f
    detail(record_property, "sweep.csv and plot_alpha_bounds.csv byte-identical")
