"""Command-line entry point.

Exit codes: 0 success, 1 check failure, 2 config error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import artifacts as io
from . import suboptimality as so
from .bounds import online_alpha_sequence
from .config import PROVENANCE_ALIASES, load_config
from .errors import ConfigError, HCMPCError
from .oracle import GridSpec, dp_value
from .scenarios import single, sweep
from .solver import solve
from .transcription import HorizonPair, build_hcmpc, build_ucmpc

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _apply_flags(cfg, args):
    changes = {}
    if getattr(args, "provenance", None):
        changes["provenance"] = PROVENANCE_ALIASES[args.provenance]
    if getattr(args, "delta", None):
        changes["delta_method"] = args.delta
    if getattr(args, "nu", None):
        changes["nu_method"] = args.nu
    if getattr(args, "baseline_lcss", False):
        changes["baseline_lcss"] = True
    if changes:
        cfg = cfg.with_scenario(**changes)
    if getattr(args, "out", None):
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _snapshot(cfg, h):
    io.write_json(os.path.join(cfg.out_dir, "config.json"), cfg.to_dict(), h)


def _obstacle_distance(model, states):
    obs = model.params.get("obstacle")
    if obs is None:
        return None
    d = np.linalg.norm(np.asarray(states)[:, :3] - np.asarray(obs), axis=1)
    return float(np.min(d))


def cmd_simulate(cfg):
    h = cfg.config_hash()
    _snapshot(cfg, h)
    scen = cfg.scenario
    row = single(scen)
    out = cfg.out_dir
    if row.error is not None:
        io.write_json(os.path.join(out, "summary.json"),
                      {"status": "error", "error": row.error}, h)
        print(f"error: {row.error}", file=sys.stderr)
        return EXIT_SOLVER
    r = row.run
    model = r.model
    alpha_seq = online_alpha_sequence(r, scen.solver) if r.steps else np.zeros(0)
    rdp = so.rdp_check(r, np.nan_to_num(alpha_seq, nan=0.0)) if r.steps else None
    passes = list(rdp.alpha_pass) if rdp is not None else []
    io.write_csv(os.path.join(out, "steps.csv"), io.step_columns(model),
                 io.step_rows(r, list(alpha_seq), passes), h)
    summary = {
        "status": r.termination,
        "N": r.horizons.N, "Ntilde": r.horizons.Ntilde,
        "steps": len(r.steps),
        "J_T": r.J_T, "tail_estimate": r.tail_estimate, "rho_hat": r.rho_hat,
        "safety_margin_min": r.safety_margin,
        "safety_margins": [np.min(model.safety_margins(s), initial=np.inf).item()
                           for s in r.states],
        "rdp_all_pass": bool(all(passes)),
        "diagnostics": {k: v for k, v in r.diagnostics.items()},
        "report": row.report.to_dict() if row.report is not None else None,
    }
    dist = _obstacle_distance(model, r.states)
    if dist is not None:
        summary["min_obstacle_distance"] = dist
        io.write_csv(os.path.join(out, "trajectory3d.csv"), ["k", "px", "py", "pz"],
                     [[k, *s[:3]] for k, s in enumerate(r.states)], h)
    io.write_json(os.path.join(out, "summary.json"), summary, h)
    print(f"J_T = {io.fmt(r.J_T)}  tail = {io.fmt(r.tail_estimate)}  "
          f"steps = {len(r.steps)}  status = {r.termination}")
    if dist is not None:
        print(f"min obstacle distance = {dist:.6f}")
    return EXIT_SOLVER if r.termination == "solver_failure" else EXIT_OK


def _row_dict(row):
    status = "error" if row.error else row.termination
    return {"N": row.N, "Ntilde": row.Ntilde, "status": status, "error": row.error,
            "V": row.V, "J_T": row.J_T, "tail": row.tail,
            "safety_margin": row.safety_margin,
            "report": row.report.to_dict() if row.report is not None else None}


def write_sweep_outputs(out, rows, h):
    io.write_csv(os.path.join(out, "sweep.csv"), io.SWEEP_COLUMNS,
                 [io.sweep_row(r) for r in rows], h)
    io.write_csv(os.path.join(out, "plot_alpha_bounds.csv"), io.PLOT_COLUMNS,
                 [io.plot_row(r["report"], r["N"], r["Ntilde"], r["J_T"]) for r in rows], h)


def cmd_sweep(cfg, jobs=1):
    h = cfg.config_hash()
    _snapshot(cfg, h)
    rows = [_row_dict(r) for r in sweep(cfg.scenario, jobs=jobs)]
    io.write_json(os.path.join(cfg.out_dir, "report.json"), {"rows": rows}, h)
    rows = io.read_json(os.path.join(cfg.out_dir, "report.json"))["rows"]
    write_sweep_outputs(cfg.out_dir, rows, h)
    failed = [r for r in rows if r["status"] in ("error", "solver_failure")]
    for r in rows:
        rep = r["report"] or {}
        print(f"N={r['N']:3d} Ntilde={r['Ntilde']:3d} {r['status']:16s} "
              f"alpha_explicit={io.fmt(rep.get('alpha_explicit'))} "
              f"alpha_lcss={io.fmt(rep.get('alpha_lcss'))}")
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_report(cfg_or_dir):
    """Re-render sweep and plot CSVs from a stored ``report.json``."""
    path = os.path.join(cfg_or_dir, "report.json")
    doc = io.read_json(path)
    write_sweep_outputs(cfg_or_dir, doc["rows"], doc["config_hash"])
    return EXIT_OK


def oracle_checks(cfg):
    """Solver-vs-oracle value agreement and the tail/sign identities.

    Returns ``(worst, records)`` where each record is
    ``(check, N, Ntilde, x0, error)``; ``error`` is compared to the tolerance.
    """
    scen, oc = cfg.scenario, cfg.oracle
    model = scen.build_model()
    if model.state_dim != 1:
        raise ConfigError("oracle-check supports scalar models only")
    b = float(model.params.get("x2_bound", 1.0))
    x1b = float(model.params.get("x1_bound", b))
    grid = GridSpec(state_lo=(-b,), state_hi=(b,), state_n=(oc.state_nodes,),
                    input_lo=tuple(model.input_lower), input_hi=tuple(model.input_upper),
                    input_n=(oc.input_nodes,), interpolation=oc.interpolation)
    xs = np.linspace(-x1b, x1b, oc.samples)
    records = []
    uc_tabs = {}

    def uc(n):
        if n not in uc_tabs:
            uc_tabs[n] = dp_value(model, n, "UCMPC", grid)
        return uc_tabs[n]

    for N in range(1, oc.N_max + 1):
        tab = uc(N)
        for x in xs:
            s = solve(build_ucmpc(model, N, np.array([x])), opts=scen.solver)
            records.append(("value_uc", N, None, x, abs(s.value - tab.value([x]))))
        for Nt in range(2, N + 1):
            hc = dp_value(model, N, "HCMPC", grid, Ntilde=Nt)
            hp = HorizonPair(N, Nt)
            for x in xs:
                s = solve(build_hcmpc(model, hp, np.array([x])), opts=scen.solver)
                records.append(("value_hc", N, Nt, x, abs(s.value - hc.value([x]))))
                if Nt >= 2 and N > Nt - 1:
                    xs_piv = s.states[hp.K + 1]
                    ref = uc(Nt - 1).value(xs_piv) if Nt - 1 >= 1 else 0.0
                    records.append(("tail", N, Nt, x, abs(so.tail_value(s, hp) - ref)))
    for Nt in range(2, oc.N_max + 1):
        sq = dp_value(model, Nt, "HCMPC", grid, Ntilde=Nt)
        for x in xs:
            diff = sq.value([x]) - uc(Nt - 1).value([x])
            records.append(("sign", Nt, Nt, x, max(0.0, -diff)))
    worst = max(records, key=lambda r: r[4])
    return worst, records


def cmd_oracle_check(cfg):
    tol = cfg.oracle.tolerance
    worst, records = oracle_checks(cfg)
    h = cfg.config_hash()
    _snapshot(cfg, h)
    io.write_csv(os.path.join(cfg.out_dir, "oracle_check.csv"),
                 ["check", "N", "Ntilde", "x0", "abs_error"],
                 [[c, N, "" if Nt is None else Nt, x, e] for c, N, Nt, x, e in records], h)
    n_bad = sum(1 for r in records if r[4] > tol)
    c, N, Nt, x, e = worst
    print(f"{len(records)} comparisons, {n_bad} above tolerance {tol:g}")
    print(f"worst: {c} N={N} Ntilde={Nt} x0={x:.6g} error={e:.3e}")
    return EXIT_CHECK if n_bad else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hcmpc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hcmpc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="DIR")

    def bound_flags(sp):
        sp.add_argument("--provenance", choices=["x0", "trajectory"])
        sp.add_argument("--delta", choices=["heuristic", "prop4"])
        sp.add_argument("--nu", choices=["heuristic", "prop7"])
        sp.add_argument("--baseline-lcss", action="store_true")

    s = sub.add_parser("simulate", help="run one closed loop")
    common(s)
    bound_flags(s)
    s = sub.add_parser("sweep", help="closed loops and bounds over horizon pairs")
    common(s)
    bound_flags(s)
    s.add_argument("--jobs", type=int, default=1, metavar="K")
    s = sub.add_parser("oracle-check", help="compare the solver with dynamic programming")
    common(s)
    s = sub.add_parser("report", help="re-render CSVs from a stored report.json")
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--config", metavar="PATH", help="ignored; kept for symmetry")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "report":
            return cmd_report(args.out)
        cfg = _apply_flags(load_config(args.config), args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "sweep":
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            return cmd_sweep(cfg, jobs=args.jobs)
        return cmd_oracle_check(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, HCMPCError) and not isinstance(exc, ConfigError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
