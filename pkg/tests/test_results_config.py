import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitrace.config import ConfigError, RunConfig, format_matrix, parse_matrix
from sitrace.results import (FAIL, INCONCLUSIVE, PASS, UNTESTABLE, combine, judge, profile_csv, read_csv,
                             to_json, worst)


def test_judge():
    assert judge(1e-10, 1e-9) == PASS
    assert judge(2e-9, 1e-9, 5e-9) == INCONCLUSIVE
    assert judge(2e-8, 1e-9, 5e-9) == FAIL
    assert judge(math.nan, 1.0, 1e9) == FAIL
    assert judge(math.inf, 1.0) == FAIL


def test_combine():
    assert combine([PASS, INCONCLUSIVE]) == INCONCLUSIVE
    assert combine([PASS, FAIL, INCONCLUSIVE]) == FAIL
    assert combine([UNTESTABLE, UNTESTABLE]) == UNTESTABLE
    assert combine([PASS, UNTESTABLE]) == PASS


def test_worst_witness():
    res = np.array([0.0, 3.0, 0.5])
    c = worst("x", res, 1.0, np.array([0.0, 0.0, 0.0]), np.array([10.0, 20.0, 30.0]))
    assert c.verdict == FAIL and c.residual == 3.0 and c.witness["xi"] == [20.0]
    c = worst("x", np.array([0.1, np.nan]), 1.0)
    assert c.verdict == FAIL and c.witness["index"] == 1


def test_json_is_stable_and_finite():
    rep = {"a": np.float64(0.1), "b": [np.int64(3), math.inf], "c": {"d": np.array([1.5, 2.5])}}
    text = to_json(rep)
    assert text == to_json(rep)
    assert text.endswith("\n") and "\r" not in text
    data = json.loads(text)
    assert data["schema"] == 1 and data["b"] == [3, "inf"]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_csv_round_trip_exact(vals):
    pts = np.arange(len(vals), dtype=float) * 0.1
    text = profile_csv(pts, vals, vals)
    header, rows = read_csv(text)
    assert header == ["xi_1", "value", "error_bar"]
    assert [float(r[1]) for r in rows] == [float(v) for v in vals]


def test_config_round_trip():
    cfg = RunConfig(systems=["bspline:2", "bump"], wavelet="haar-wavelet", scaling="haar-scaling",
                    dilation=[[1, 1], [1, -1]], grid=64, window=16, depth=12, s_range=4, tol=1e-7,
                    rank_tol=1e-9, tail_tol=1e-5, seed=42, out="o", format="json",
                    quasi_orthogonalize=True, perturb=1e-3, spectra={"bump": "-3.0 3.0 | 1, 0, -0.1"})
    back = RunConfig.from_ini(cfg.to_ini())
    assert back == cfg


@pytest.mark.parametrize("text,field", [
    ("[run]\ngrid = -1\n", "grid"),
    ("[run]\ngrid = abc\n", "run.grid"),
    ("[run]\nbogus = 1\n", "run.bogus"),
    ("[tolerances]\nidentity = 2\n", "tol"),
    ("[weird]\n", "weird"),
    ("[run]\ndilation = 1,2,3\n", "run.dilation"),
    ("[spectrum:x]\nfoo = 1\n", "pieces"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_ini(text)
    assert field in str(exc.value)


def test_matrix_helpers():
    assert parse_matrix("2") == [[2]]
    assert parse_matrix("1,1,1,-1") == [[1, 1], [1, -1]]
    assert format_matrix([[1, 1], [1, -1]]) == "1,1,1,-1"
    with pytest.raises(ConfigError):
        parse_matrix("1.5")


def test_window_defaults():
    assert RunConfig().window_for(1) == 128
    assert RunConfig().window_for(2) == 8
    assert RunConfig(window=5).window_for(2) == 5
