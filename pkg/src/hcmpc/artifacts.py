"""CSV and JSON writers for run artifacts.

Numbers are written with 17 significant digits so values round-trip
exactly and repeated runs are byte-comparable. Every file starts with (CSV)
or contains (JSON) the tool version and the config hash.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from . import __version__


def fmt(v):
    """Round-trip text for a number; empty for ``None``."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def header_line(config_hash):
    return f"# hcmpc {__version__} config {config_hash}"


def write_csv(path, columns, rows, config_hash):
    """Write ``rows`` (sequences aligned with ``columns``) after a provenance comment."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header_line(config_hash) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])


def read_csv(path):
    """``(columns, rows)`` with the provenance comment skipped; cells stay text."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rd = list(csv.reader(lines))
    return rd[0], rd[1:]


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_json(path, payload, config_hash):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    doc = {"tool": "hcmpc", "version": __version__, "config_hash": config_hash}
    doc.update(_plain(payload))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def step_columns(model):
    xs = [f"x{i}" for i in range(model.state_dim)]
    us = [f"u{i}" for i in range(model.input_dim)]
    return ["k"] + xs + us + ["stage_cost", "V", "alpha_online", "rdp_pass"]


def step_rows(run, alpha_online, rdp_pass):
    """Per-step rows; ``rdp_pass`` is empty for the last step (no successor)."""
    rows = []
    for i, s in enumerate(run.steps):
        a = alpha_online[i] if i < len(alpha_online) else None
        p = rdp_pass[i] if i < len(rdp_pass) else None
        rows.append([s.k, *s.state, *s.input, s.stage_cost, s.solution.value, a,
                     "" if p is None else bool(p)])
    return rows


PLOT_COLUMNS = ["N", "Ntilde", "N_minus_Ntilde", "alpha_explicit", "alpha_lcss", "V_over_alpha",
                "V_over_1_minus_omega", "J_T"]

SWEEP_COLUMNS = ["N", "Ntilde", "status", "V", "J_T", "tail", "safety_margin",
                 "alpha_online", "omega_online", "alpha_explicit", "omega_explicit", "alpha_lcss",
                 "delta", "nu", "kappa", "sigma1", "sigma2", "sigma3", "sigma4",
                 "upper_bound", "lower_bound", "interval_lo", "interval_hi"]


def _ratio(V, d):
    if V is None or d is None or not d > 0:
        return None
    return V / d


def plot_row(rep_dict, N, Nt, J_T):
    """One plot-data row from a serialized report (``None`` entries when absent)."""
    r = rep_dict or {}
    a, w, V = r.get("alpha_explicit"), r.get("omega_explicit"), r.get("V")
    return [N, Nt, N - Nt, a, r.get("alpha_lcss"), _ratio(V, a),
            _ratio(V, None if w is None else 1.0 - w), J_T]


def sweep_row(row_dict):
    r = row_dict.get("report") or {}
    iv = r.get("interval") or (None, None)
    return [row_dict["N"], row_dict["Ntilde"], row_dict["status"], row_dict.get("V"),
            row_dict.get("J_T"), row_dict.get("tail"), row_dict.get("safety_margin"),
            r.get("alpha_online"), r.get("omega_online"), r.get("alpha_explicit"),
            r.get("omega_explicit"), r.get("alpha_lcss"), r.get("delta"), r.get("nu"),
            r.get("kappa"), r.get("sigma1"), r.get("sigma2"), r.get("sigma3"), r.get("sigma4"),
            r.get("upper_bound"), r.get("lower_bound"), iv[0], iv[1]]
