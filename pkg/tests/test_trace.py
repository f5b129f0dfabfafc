import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitrace.catalog import catalog_get, spectrum
from sitrace.lattice import QUINCUNX, dilation, window
from sitrace.results import FAIL, PASS, UNTESTABLE
from sitrace.spectra import (GeneratorSystem, compose, dilate_system, interval_grid, quasi_orthogonalize,
                             sample_grid)
from sitrace.trace import (CertificationError, PositiveOperator, certify, check_additivity,
                           check_dilation, check_linearity, check_modulation, check_monotone_convergence,
                           check_monotony, check_periodicity, delta, dimension_function, from_matrix,
                           identity, local_trace, operator_trace, projection_trace, random_psd, rank_one,
                           restricted_trace, restricted_values, spectral_function, trace_data_differ,
                           trace_values, unit_vectors)

W = window(1, 32)
GRID = sample_grid(1, 64)
SHANNON = certify(catalog_get("shannon-scaling"), W)
MEYER = certify(catalog_get("meyer-scaling"), W)
QHAT = certify(GeneratorSystem((quasi_orthogonalize(spectrum("bspline:2"), W),), 1, name="qo-hat"), W)


def test_certify_refuses_hat():
    with pytest.raises(CertificationError, match="quasi-orthogonalize"):
        certify(catalog_get("bspline:2"), W)
    c = certify(catalog_get("bspline:2"), W, unchecked=True)
    assert c.certificate.verdict == FAIL


def test_uncertified_input_is_rejected():
    with pytest.raises(CertificationError):
        trace_values(catalog_get("shannon-scaling"), identity(W), GRID, W)


def test_dimension_function_values():
    for cs in (SHANNON, MEYER, QHAT):
        prof = dimension_function(cs, GRID, W)
        assert np.allclose(prof.values, 1.0, atol=1e-12)
        assert prof.flags["non_integer"] is False
    # without certification the fiber sum of the hat is its periodization (2 + cos) / 3
    hat = dimension_function(catalog_get("bspline:2"), GRID, window(1, 200), unchecked=True)
    assert np.all(np.abs(hat.values - (2 + np.cos(GRID[:, 0])) / 3) <= hat.truncation_error + 1e-14)


def test_spectral_function_shannon():
    pts = interval_grid(-2 * math.pi, 2 * math.pi, 128)
    sig = spectral_function(SHANNON, pts, W)
    inside = np.abs(pts) < math.pi
    assert np.all(sig.values[inside] == 1.0) and np.all(sig.values[~inside] == 0.0)


def test_trace_equals_projection_trace():
    rng = np.random.default_rng(3)
    T = random_psd(W, rng, rank=4, support=5)
    for cs in (SHANNON, MEYER, QHAT):
        v, bar, gap = local_trace(cs, T, 0.4, W, cross_check=True)
        assert abs(gap) <= 1e-12 + bar
    f = unit_vectors(W, 1, 11)[0]
    val, gap = restricted_trace(MEYER, f, 1.3, W, cross_check=True)
    assert abs(gap) < 1e-12


def test_trace_independent_of_ntf_generator():
    # multiplying the spectrum by a unimodular 2 pi periodic factor keeps the space and the NTF property
    g = spectrum("meyer-scaling")
    phased = certify(GeneratorSystem((compose(g, [[1.0]], "meyer*e^-i", phase=np.array([1.0])),), 1), W)
    T = random_psd(W, np.random.default_rng(5), support=4)
    a, _ = trace_values(MEYER, T, GRID, W)
    b, _ = trace_values(phased, T, GRID, W)
    assert np.allclose(a, b, atol=1e-13)
    assert trace_data_differ(MEYER, phased, GRID[:8], W) is None
    assert trace_data_differ(MEYER, SHANNON, GRID[:8], W) is not None


def test_operator_trace_over_basis():
    T = random_psd(W, np.random.default_rng(1), rank=2)
    assert abs(operator_trace(T, np.eye(W.size)) - np.trace(T.matrix).real) < 1e-12


def test_operator_constructors():
    with pytest.raises(ValueError):
        from_matrix(-np.eye(W.size), W)
    with pytest.raises(ValueError):
        rank_one(np.ones(3), W)
    D = delta(2, W)
    assert D.matrix[W.position(2), W.position(2)] == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.0, 5.0))
def test_trace_is_linear_in_the_operator(seed, lam):
    rng = np.random.default_rng(seed)
    T = random_psd(W, rng, support=6)
    S = random_psd(W, rng, support=6)
    xs = GRID[::8]
    a, _ = trace_values(MEYER, T + S.scaled(lam), xs, W)
    b, _ = trace_values(MEYER, T, xs, W)
    c, _ = trace_values(MEYER, S, xs, W)
    assert np.allclose(a, b + lam * c, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_restricted_trace_bounded_by_norm(seed):
    f = unit_vectors(W, 3, seed)
    vals = restricted_values(MEYER, f, GRID[::4], W)
    assert np.all(vals <= 1.0 + 1e-12) and np.all(vals >= 0)


def test_periodicity_check():
    T = random_psd(W, np.random.default_rng(2), support=6)
    for k in (1, -3):
        assert check_periodicity(QHAT, T, GRID, k, W).verdict == PASS
    # an operator supported at the window edge loses mass under the shift
    edge = delta(32, W)
    assert check_periodicity(QHAT, edge, GRID, 1, W).verdict == UNTESTABLE


def test_linearity_check():
    rng = np.random.default_rng(4)
    c = check_linearity(MEYER, random_psd(W, rng, support=5), random_psd(W, rng, support=5), GRID, W,
                        f=unit_vectors(W, 1)[0])
    assert c.verdict == PASS


def test_additivity_check():
    sw = certify(catalog_get("shannon-wavelet"), W)
    T = random_psd(W, np.random.default_rng(8), support=5)
    assert check_additivity([SHANNON, sw], T, GRID, W).verdict == PASS
    with pytest.raises(ValueError, match="not orthogonal"):
        check_additivity([SHANNON, MEYER], T, GRID, W)


def test_monotony_check():
    v1 = certify(dilate_system(catalog_get("shannon-scaling"), dilation(2)), W)
    assert check_monotony(SHANNON, v1, GRID, W).verdict == PASS
    c = check_monotony(v1, SHANNON, GRID, W)
    assert c.verdict == FAIL and c.witness["probe"]


def test_modulation_check():
    T = random_psd(W, np.random.default_rng(6), support=5)
    c = check_modulation(MEYER, [0.7], T, GRID, W)
    assert c.verdict == PASS and c.details["recertified"] == PASS


@pytest.mark.parametrize("a", [1, 2, 3])
def test_dilation_check_1d(a):
    T = random_psd(W, np.random.default_rng(a), support=4)
    assert check_dilation(QHAT, dilation(a), T, GRID, W).verdict == PASS


def test_dilation_check_quincunx():
    W2 = window(2, 6)
    q2 = GeneratorSystem((quasi_orthogonalize(catalog_get("tensor:bspline:2*bspline:2").generators[0], W2),), 2)
    cq = certify(q2, W2)
    T = random_psd(W2, np.random.default_rng(9), support=1)
    c = check_dilation(cq, QUINCUNX, T, sample_grid(2, 6), W2)
    assert c.verdict == PASS


def test_dilation_rejects_non_quasi_orthogonal():
    with pytest.raises(ValueError, match="quasi-orthogonal"):
        check_dilation(certify(catalog_get("bspline:2"), W, unchecked=True), dilation(2), identity(W), GRID, W,
                       unchecked=True)


def test_monotone_convergence_check():
    x = np.linspace(0, 1, 101)
    w = np.full(101, 0.01)
    profiles = np.array([np.minimum(1.0, x * 2 ** j) for j in range(5)])
    ok = check_monotone_convergence(profiles, 1.0, w)
    assert ok.verdict == PASS
    bad = check_monotone_convergence(profiles[::-1], 1.0, w)
    assert bad.verdict == FAIL and "j" in bad.witness
    halved = np.array([1 - 0.5 ** j * np.ones(4) for j in range(1, 5)])
    assert check_monotone_convergence(halved, 1.0, np.ones(4), halving_rtol=0.05).verdict == PASS
    assert check_monotone_convergence(halved ** 3, 1.0, np.ones(4), halving_rtol=0.05).verdict == FAIL


def test_window_mismatch_is_rejected():
    with pytest.raises(ValueError):
        trace_values(MEYER, identity(window(1, 8)), GRID, W)


def test_positive_operator_arithmetic():
    T = identity(W, 2.0) + delta(0, W)
    assert isinstance(T, PositiveOperator)
    assert T.identity_scale == 2.0
    v, bar = local_trace(MEYER, T, 0.2, W)
    assert abs(v - (2.0 + abs(spectrum("meyer-scaling").evaluate(0.2)) ** 2)) < 1e-12
    assert projection_trace(MEYER, delta(0, W), [0.2], W)[0] == pytest.approx(v - 2.0, abs=1e-12)
