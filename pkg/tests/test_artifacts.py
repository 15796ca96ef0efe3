import math

import numpy as np

from hcmpc import artifacts as io


def test_fmt_round_trip():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17, np.float64(7.125)):
        assert float(io.fmt(v)) == float(v)
    assert io.fmt(None) == ""
    assert io.fmt(True) == "1"
    assert io.fmt(np.int64(4)) == "4"
    assert io.fmt(float("nan")) == "nan"
    assert io.fmt(-math.inf) == "-inf"


def test_csv_round_trip(tmp_path):
    p = tmp_path / "a" / "t.csv"
    io.write_csv(p, ["x", "y"], [[1, 0.5], [2, None]], "abc")
    assert p.read_text().splitlines()[0] == io.header_line("abc")
    cols, rows = io.read_csv(p)
    assert cols == ["x", "y"] and rows == [["1", "0.5"], ["2", ""]]


def test_json_provenance_and_no_nan(tmp_path):
    p = tmp_path / "r.json"
    io.write_json(p, {"a": np.float64(np.nan), "b": np.arange(2), "c": (1, 2.0)}, "h")
    doc = io.read_json(p)
    assert doc["tool"] == "hcmpc" and doc["config_hash"] == "h"
    assert doc["a"] is None and doc["b"] == [0, 1] and doc["c"] == [1, 2.0]


def test_plot_row_ratios():
    row = io.plot_row({"alpha_explicit": 0.5, "omega_explicit": 0.2, "V": 10.0,
                       "alpha_lcss": -1.0}, 10, 4, 12.0)
    assert row == [10, 4, 6, 0.5, -1.0, 20.0, 12.5, 12.0]
    neg = io.plot_row({"alpha_explicit": -0.5, "V": 1.0}, 10, 4, 1.0)
    assert neg[5] is None and neg[6] is None
    assert len(io.sweep_row({"N": 3, "Ntilde": 2, "status": "x"})) == len(io.SWEEP_COLUMNS)
