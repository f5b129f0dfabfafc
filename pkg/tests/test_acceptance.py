"""Acceptance gate: every criterion at its stated tolerance, one summary line each.

Run ``pytest tests/test_acceptance.py -v`` and read the "acceptance criteria"
section at the end of the report.
"""

import json
import math
import time

import numpy as np
import pytest

from sitrace.catalog import catalog_get
from sitrace.cli import main
from sitrace.gramian import certify_ntf, frame_bounds
from sitrace.lattice import dilation, window
from sitrace.spectra import dilate_system, interval_grid, sample_grid
from sitrace.trace import certify, check_monotone_convergence, dimension_function, spectral_function
from sitrace.wavelet import (calibration_sum, characterize_ntf_wavelet, mra_consistency, s_values,
                             scaling_wavelet_match, t_s, wavelet_dimension_function, wavelet_system)

GRID = sample_grid(1, 1024)
W128 = window(1, 128)


@pytest.fixture(scope="module")
def properties_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("props")
    t0 = time.perf_counter()
    code = main(["properties", "--out", str(out)])
    elapsed = time.perf_counter() - t0
    return code, (out / "properties.json").read_bytes(), elapsed


def _haar_oracle(xi):
    # (1 - e^{-i xi/2})^2 / (i xi), written out independently of the catalog
    xi = np.asarray(xi, dtype=float)
    safe = np.where(xi == 0, 1.0, xi)
    return np.where(xi == 0, 0.0, np.expm1(-0.5j * safe) ** 2 / (1j * safe))


def test_criterion_1_shannon_wavelet(tmp_path, acceptance):
    t0 = time.perf_counter()
    code = main(["verify", "wavelet", "--wavelet", "shannon-wavelet", "--dilation", "2", "--grid", "1024",
                 "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    rep = json.loads((tmp_path / "verify-wavelet.json").read_text())
    res = rep["certificate"]["residual"]
    ok = code == 0 and rep["verdict"] == "PASS" and res <= 1e-12 and elapsed <= 5.0
    acceptance(1, ok, f"residual={res:.3g} (<= 1e-12), runtime={elapsed:.2f}s (<= 5s)")
    assert ok


def test_criterion_2_haar_wavelet(acceptance):
    ws = wavelet_system(catalog_get("haar-wavelet"), 2, 30)
    rep = characterize_ntf_wavelet(ws, GRID, s_range=8, tol=1e-7)
    cert = rep.certificate
    # oracle: independent re-summation with twice the scale depth
    J = 60
    x = GRID[:, 0]
    cal = sum(np.abs(_haar_oracle(2.0 ** j * x)) ** 2 for j in range(-J, J + 1))
    got, _ = calibration_sum(ws, GRID)
    gap = float(np.abs(got - cal).max())
    for s in s_values(ws, 8):
        ts = sum(_haar_oracle(2.0 ** j * x) * np.conj(_haar_oracle(2.0 ** j * (x + 2 * math.pi * s[0])))
                 for j in range(0, J + 1))
        mine, _ = t_s(ws, s, GRID)
        gap = max(gap, float(np.abs(mine - ts).max()))
    ok = cert.verdict == "PASS" and cert.residual <= 1e-7 and gap <= 1e-10
    acceptance(2, ok, f"residual={cert.residual:.3g} (<= 1e-7), oracle gap at J=60: {gap:.3g} (<= 1e-10)")
    assert ok


def test_criterion_3_dimension_equals_wavelet_dimension(acceptance):
    parts, ok = [], True
    for wname, sname, bound in (("shannon-wavelet", "shannon-scaling", 1e-6), ("haar-wavelet", "haar-scaling", 1e-3)):
        ws = wavelet_system(catalog_get(wname), 2, 30)
        d = wavelet_dimension_function(ws, GRID, W128)
        tau = dimension_function(certify(catalog_get(sname), W128), GRID, W128)
        gap = np.abs(tau.values - d.values)
        bars = tau.truncation_error + d.truncation_error
        this = bool(np.all(gap <= bars + 1e-12)) and float(gap.max()) <= bound
        ok &= this
        parts.append(f"{sname.split('-')[0]} max gap={gap.max():.3g} (<= {bound:g}, covered by bar {bars.max():.3g})")
    acceptance(3, ok, "; ".join(parts))
    assert ok


def test_criterion_4_scaling_relations(acceptance):
    parts, ok = [], True
    for wname, sname, tol in (("shannon-wavelet", "shannon-scaling", 1e-12), ("haar-wavelet", "haar-scaling", 1e-8)):
        ws = wavelet_system(catalog_get(wname), 2, 30)
        phis = catalog_get(sname)
        m = scaling_wavelet_match(ws, phis, GRID, 8, tol)
        c = mra_consistency(ws, phis, GRID, 8, tol)
        this = m.verdict == "PASS" and c.verdict == "PASS" and max(m.residual, c.residual) <= tol
        ok &= this
        parts.append(f"{sname.split('-')[0]} match={m.residual:.3g} sign/magnitude={c.residual:.3g} (<= {tol:g})")
    acceptance(4, ok, "; ".join(parts))
    assert ok


def _brute_force_hat_periodization(M=2 ** 16, K=10 ** 4):
    # |hat^(y)|^2 = (sin(y/2)/(y/2))^4 and sin^4((xi + 2 pi k)/2) = sin^4(xi/2) for every k,
    # so each lattice term is 16 sin^4(xi/2) / (xi + 2 pi k)^4
    xs = interval_grid(-math.pi, math.pi, M)
    k = 2 * math.pi * np.arange(-K, K + 1)
    per = np.empty(M)
    buf = np.empty((4, k.size))
    for i in range(0, M, 4):
        c = xs[i:i + 4]
        np.add(c[:, None], k[None], out=buf)
        buf *= buf
        buf *= buf
        np.reciprocal(buf, out=buf)
        per[i:i + 4] = 16 * np.sin(c / 2) ** 4 * buf.sum(axis=1)
    return per


def test_criterion_5_frame_bounds(acceptance):
    fb = frame_bounds(catalog_get("bspline:2"), GRID, W128)
    per = _brute_force_hat_periodization()
    lo, hi = float(per.min()), float(per.max())
    ok = abs(fb.A - lo) <= 1e-3 and abs(fb.B - hi) <= 1e-3
    acceptance(5, ok, f"estimate=({fb.A:.6f}, {fb.B:.6f}) oracle=({lo:.6f}, {hi:.6f}) (within 1e-3)")
    assert ok


def test_criterion_6_identity_harness(properties_run, acceptance):
    code, body, elapsed = properties_run
    rep = json.loads(body)
    groups = ("periodicity", "linearity", "additivity", "monotony", "modulation", "dilation", "ntf-trace")
    checks = [c for c in rep["checks"] if c["name"].split("/")[0] in groups]
    bad = [c["name"] for c in checks if c["verdict"] != "PASS"]
    worst_res = max(c["residual"] for c in checks if not c["details"].get("control"))
    names = " ".join(c["name"] for c in checks)
    dil = all(f"A={a}" in names for a in ("[1]", "[2]", "2I", "quincunx"))
    present = all(any(c["name"].startswith(g) for c in checks) for g in groups)
    ok = code == 0 and not bad and worst_res <= 1e-9 and elapsed <= 60.0 and dil and present
    acceptance(6, ok, f"{len(checks)} checks, failing={bad or 'none'}, max residual={worst_res:.3g} (<= 1e-9), "
                      f"runtime={elapsed:.1f}s (<= 60s)")
    assert ok


@pytest.mark.xfail(strict=True, reason="the j=0..6 Shannon chain reaches the limit profile on [-2pi, 2pi] at j=1, "
                                       "so the L1 gaps are (2pi, 0, ..., 0) and cannot halve at each step")
def test_criterion_7_monotone_convergence(acceptance):
    W = window(1, 128)
    M = 1024
    pts = interval_grid(-2 * math.pi, 2 * math.pi, M)
    weights = np.full(M, 4 * math.pi / M)
    chain = catalog_get("shannon-scaling")
    profiles = []
    for j in range(7):
        profiles.append(spectral_function(certify(chain, W), pts, W).values)
        chain = dilate_system(chain, dilation(2))
    cert = check_monotone_convergence(profiles, 1.0, weights, 1e-10, halving_rtol=0.05)
    gaps = ", ".join(f"{g:.4g}" for g in cert.details["l1_gaps"])
    mono = cert.residual <= 1e-10
    ok = cert.verdict == "PASS"
    acceptance(7, ok, f"nondecreasing={'yes' if mono else 'no'}, L1 gaps=({gaps}), halving within 5%: "
                      f"{'yes' if ok else 'no'} (expected failure, see ledger)")
    assert ok


def test_criterion_8_negative_controls(tmp_path, acceptance):
    hat = certify_ntf(catalog_get("bspline:2"), GRID, W128)
    witness = hat.witness["eigenvalue"]
    ws = wavelet_system(catalog_get("shannon-scaling"), 2, 30)
    rep = characterize_ntf_wavelet(ws, GRID)
    cal_fail = any(e["name"] == "calibration" and e["verdict"] == "FAIL" for e in rep.certificate.details["equations"])
    code = main(["properties", "--perturb", "1e-3", "--out", str(tmp_path)])
    pert = json.loads((tmp_path / "properties.json").read_text())
    flipped = pert["summary"]["FAIL"]
    ok = (hat.verdict == "FAIL" and abs(witness - 1 / 3) <= 1e-3 and rep.certificate.verdict == "FAIL"
          and cal_fail and code == 1 and flipped >= 1)
    acceptance(8, ok, f"hat witness={witness:.6f} (1/3 within 1e-3), shannon-scaling as wavelet: "
                      f"{rep.certificate.verdict}, perturbed harness: {flipped} FAIL")
    assert ok


def test_criterion_9_determinism(properties_run, tmp_path, acceptance):
    _, first, _ = properties_run
    main(["properties", "--out", str(tmp_path)])
    second = (tmp_path / "properties.json").read_bytes()
    ok = first == second
    acceptance(9, ok, f"two properties runs byte-identical: {'yes' if ok else 'no'} ({len(first)} bytes)")
    assert ok
