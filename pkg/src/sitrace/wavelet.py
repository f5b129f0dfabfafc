"""Wavelet characterization equations and quasi-affine fibers.

For a finite wavelet set Psi and an expansive integer dilation A:

    calibration   sum_psi sum_{j in Z} |psi^((A*)^j xi)|^2 = 1
    cross term    t_s(xi) = sum_psi sum_{j >= 0} psi^((A*)^j xi) conj psi^((A*)^j (xi + 2 pi s)) = 0,
                  s not in A* Z^n

The quasi-affine fibers f^j(xi)(k) = psi^((A*)^j (xi + 2 pi k)), j >= 1,
form an NTF family for the fibers of V_0 when the wavelet is semiorthogonal.
Every truncated sum carries a tail bound from the spectrum metadata.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .gramian import fiber_stack
from .lattice import DilationMatrix, IndexWindow, coset_representatives, in_sublattice
from .results import Certificate, combine, worst
from .spectra import GeneratorSpectrum, GeneratorSystem, as_points, compose, dilate_system, recenter
from .trace import PositiveOperator, TraceProfile, cross_fiber_norm, trace_values

CALIBRATION_ID = "calibration"


def cross_id(s) -> str:
    return "cross:s=" + ",".join(str(int(c)) for c in np.atleast_1d(s))


@dataclass(frozen=True)
class WaveletSystem:
    psis: GeneratorSystem
    dilation: DilationMatrix
    scale_depth: int = 30
    claimed_semiorthogonal: bool = True

    def __post_init__(self):
        if not self.dilation.expansive:
            raise ValueError(f"dilation {self.dilation.tolist()} is not expansive")
        if self.dilation.dimension != self.psis.dimension:
            raise ValueError("dilation and wavelet dimensions differ")
        if self.scale_depth < 1:
            raise ValueError("scale depth must be >= 1")

    @property
    def dimension(self) -> int:
        return self.psis.dimension

    @property
    def star(self) -> np.ndarray:
        return self.dilation.star.array.astype(float)

    def power(self, j: int) -> np.ndarray:
        """(A*)^j as a float matrix; exact integer arithmetic for j >= 0."""
        return _star_power(self.dilation.entries, j).copy()

    def sigma_min(self, j: int) -> float:
        return float(np.linalg.svd(self.power(j), compute_uv=False).min())

    def sigma_max(self, j: int) -> float:
        return float(np.linalg.svd(self.power(j), compute_uv=False).max())


@functools.lru_cache(maxsize=512)
def _star_power(entries: tuple, j: int) -> np.ndarray:
    star = [list(col) for col in zip(*entries)]
    if j >= 0:
        P = np.eye(len(star), dtype=object)
        S = np.array(star, dtype=object)
        for _ in range(j):
            P = P.dot(S)
        return P.astype(float)
    return np.linalg.matrix_power(np.linalg.inv(np.array(star, dtype=float)), -j)


def wavelet_system(psis: GeneratorSystem, A, depth: int = 30, semiorthogonal: bool = True) -> WaveletSystem:
    from .lattice import dilation
    return WaveletSystem(psis, dilation(A), depth, semiorthogonal)


def _abs2_at(g: GeneratorSpectrum, pts: np.ndarray, M: np.ndarray) -> np.ndarray:
    return np.abs(g.evaluate(pts @ M.T)) ** 2


# -- tail bounds over scales --------------------------------------------------------

def _large_scale_tail(ws: WaveletSystem, g: GeneratorSpectrum, norms: np.ndarray, J: int) -> np.ndarray:
    """Bound on sum_{j > J} |g^((A*)^j xi)|^2 given |xi| (array)."""
    env = g.envelope
    if env.C == 0.0:
        return np.zeros_like(norms)
    sJ1 = ws.sigma_min(J + 1)
    out = np.full(norms.shape, np.inf)
    if g.support_radius is not None:
        out = np.where(sJ1 * norms > g.support_radius, 0.0, out)
    r = ws.sigma_min(1)
    if env.p > 0 and r > 1.0:
        # |(A*)^{J+m} xi| >= sigma_min(A*^{J+1}) r^{m-1} |xi|, and 1 + x >= x
        q = r ** (-2 * env.p)
        with np.errstate(divide="ignore"):
            geo = env.C ** 2 * (env.s * sJ1 * norms) ** (-2 * env.p) / (1.0 - q)
        out = np.minimum(out, geo)
    return out


def _small_scale_tail(ws: WaveletSystem, g: GeneratorSpectrum, norms: np.ndarray, J: int,
                      last_terms: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Bound on sum_{j > J} |g^((A*)^-j xi)|^2 given |xi|."""
    if g.envelope.C == 0.0:
        return np.zeros_like(norms)
    smax = ws.sigma_max(-(J + 1))
    out = np.full(norms.shape, np.inf)
    if g.hole_radius > 0:
        out = np.where(smax * norms < g.hole_radius, 0.0, out)
    rho = ws.sigma_max(-1)
    if g.small_scale is not None and rho < 1.0:
        c, q = g.small_scale
        ratio = rho ** (2 * q)
        out = np.minimum(out, c ** 2 * (smax * norms) ** (2 * q) / (1.0 - ratio))
    elif last_terms is not None:
        # empirical geometric monitor with safety factor 10
        prev, last = last_terms
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(prev > 0, last / prev, 1.0)
        mon = np.where(ratio < 1.0, 10.0 * last * ratio / np.maximum(1.0 - ratio, 1e-300), np.inf)
        mon = np.where(last == 0.0, 0.0, mon)
        out = np.minimum(out, mon)
    return out


# -- characterization equations -----------------------------------------------------

def calibration_sum(ws: WaveletSystem, xis, depth: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """sum_psi sum_{|j| <= J} |psi^((A*)^j xi)|^2 and its tail bound, per point."""
    J = ws.scale_depth if depth is None else depth
    pts = as_points(xis, ws.dimension)
    norms = np.linalg.norm(pts, axis=1)
    total = np.zeros(pts.shape[0])
    bar = np.zeros(pts.shape[0])
    for g in ws.psis:
        edge = inner = np.zeros(pts.shape[0])
        for j in range(-J, J + 1):
            term = _abs2_at(g, pts, ws.power(j))
            total += term
            if j == -J:
                edge = term
            elif j == -J + 1:
                inner = term
        # the empirical monitor extrapolates from the two smallest scales in the sum
        bar += _large_scale_tail(ws, g, norms, J) + _small_scale_tail(ws, g, norms, J, (inner, edge))
    return total, bar


def _check_s(ws: WaveletSystem, s) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=np.int64))
    if s.shape != (ws.dimension,):
        raise ValueError("s has the wrong dimension")
    if in_sublattice(s, ws.dilation):
        raise ValueError(f"s={s.tolist()} lies in A*Z^n; the cross equation needs s outside it")
    return s


def _cross_sum(ws: WaveletSystem, pts: np.ndarray, s: np.ndarray, j0: int, J: int):
    shifted = pts + 2 * math.pi * s
    total = np.zeros(pts.shape[0], dtype=complex)
    ta = np.zeros(pts.shape[0])
    tb = np.zeros(pts.shape[0])
    na, nb = np.linalg.norm(pts, axis=1), np.linalg.norm(shifted, axis=1)
    bar = np.zeros(pts.shape[0])
    for g in ws.psis:
        for j in range(j0, J + 1):
            M = ws.power(j)
            total += g.evaluate(pts @ M.T) * np.conj(g.evaluate(shifted @ M.T))
        ta = _large_scale_tail(ws, g, na, J)
        tb = _large_scale_tail(ws, g, nb, J)
        # Cauchy-Schwarz on the omitted scales
        bar += np.sqrt(ta * tb)
    return total, bar


def t_s(ws: WaveletSystem, s, xis, depth: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    J = ws.scale_depth if depth is None else depth
    s = _check_s(ws, s)
    return _cross_sum(ws, as_points(xis, ws.dimension), s, 0, J)


def s_values(ws: WaveletSystem, s_range: int, outside_only: bool = True) -> list[np.ndarray]:
    out = []
    for s in itertools.product(range(-s_range, s_range + 1), repeat=ws.dimension):
        if outside_only and in_sublattice(s, ws.dilation):
            continue
        out.append(np.array(s, dtype=np.int64))
    return out


@dataclass
class WaveletReport:
    certificate: Certificate
    rows: list = field(default_factory=list)  # (xi, eq_id, residual, tail_bound)

    def csv_rows(self):
        for xi, eq, r, t in self.rows:
            yield [" ".join(repr(float(v)) for v in xi), eq, float(r), float(t)]


def characterize_ntf_wavelet(ws: WaveletSystem, grid, s_range: int = 8, tol: float = 1e-9,
                             depth: int | None = None) -> WaveletReport:
    pts = as_points(grid, ws.dimension)
    cal, cal_bar = calibration_sum(ws, pts, depth)
    # omitted scales only add mass, so an excess over 1 is never a truncation effect
    cal_bar = np.where(cal > 1.0, 0.0, cal_bar)
    certs = [worst("calibration", np.abs(cal - 1.0), tol, cal_bar, pts)]
    rows = [(p, CALIBRATION_ID, r, b) for p, r, b in zip(pts, np.abs(cal - 1.0), cal_bar)]
    cross_res = np.zeros(pts.shape[0])
    cross_bar = np.zeros(pts.shape[0])
    for s in s_values(ws, s_range):
        val, bar = t_s(ws, s, pts, depth)
        r = np.abs(val)
        rows.extend((p, cross_id(s), ri, bi) for p, ri, bi in zip(pts, r, bar))
        c = worst(f"cross s={s.tolist()}", r, tol, bar, pts)
        c.witness["s"] = s.tolist()
        certs.append(c)
        cross_res = np.maximum(cross_res, r)
        cross_bar = np.maximum(cross_bar, bar)
    verdict = combine([c.verdict for c in certs])
    top = max(certs, key=lambda c: (c.verdict == "FAIL", c.residual))
    cert = Certificate("wavelet", verdict, max(c.residual for c in certs), tol, top.error_bar,
                       dict(top.witness, equation=top.name),
                       {"dilation": ws.dilation.tolist(), "depth": ws.scale_depth if depth is None else depth,
                        "s_range": s_range, "system": ws.psis.name,
                        "calibration_residual": certs[0].residual,
                        "cross_residual": float(cross_res.max(initial=0.0)),
                        "equations": [{"name": c.name, "verdict": c.verdict, "residual": c.residual}
                                      for c in certs]})
    return WaveletReport(cert, rows)


# -- quasi-affine fibers -------------------------------------------------------------

@dataclass(frozen=True)
class QuasiAffineFiber:
    xi: np.ndarray
    j: int
    psi_index: int
    values: np.ndarray
    tail_bound: float


def scaled_spectrum(ws: WaveletSystem, g: GeneratorSpectrum, j: int) -> GeneratorSpectrum:
    """xi -> g^((A*)^j xi)."""
    return compose(g, ws.power(j), f"{g.name}@A*^{j}")


def quasi_affine_system(ws: WaveletSystem, depth: int | None = None) -> GeneratorSystem:
    """Generators xi -> psi^((A*)^j xi), j = 1..J: an NTF family for the fibers of V_0."""
    J = ws.scale_depth if depth is None else depth
    gens = tuple(scaled_spectrum(ws, g, j) for j in range(1, J + 1) for g in ws.psis)
    return GeneratorSystem(gens, ws.dimension, "unverified", f"qa({ws.psis.name},J={J})")


def quasi_affine_fibers(ws: WaveletSystem, xi, W: IndexWindow, depth: int | None = None) -> list[QuasiAffineFiber]:
    if not ws.claimed_semiorthogonal:
        raise ValueError("quasi-affine fibers describe V_0 only for semiorthogonal wavelets")
    J = ws.scale_depth if depth is None else depth
    pt = as_points(xi, ws.dimension)
    if pt.shape[0] != 1:
        raise ValueError("expected a single base point")
    base = pt[0] + 2 * math.pi * W.indices
    out = []
    for j in range(1, J + 1):
        M = ws.power(j)
        for i, g in enumerate(ws.psis):
            vals = g.evaluate(base @ M.T)
            tail = float(scaled_spectrum(ws, g, j).window_tail(pt, W.radius)[0])
            out.append(QuasiAffineFiber(pt[0], j, i, vals, tail))
    return out


def _depth_tail(ws: WaveletSystem, pts: np.ndarray, J: int) -> np.ndarray:
    """Bound on sum_{j > J} sum_psi sum_{k in Z^n} |psi^((A*)^j (xi + 2 pi k))|^2."""
    r, _ = recenter(pts)
    rn = np.linalg.norm(r, axis=1)
    n = ws.dimension
    bar = np.zeros(pts.shape[0])
    for g in ws.psis:
        env = g.envelope
        if env.C == 0.0:
            continue
        sJ1 = ws.sigma_min(J + 1)
        term = np.full(pts.shape[0], np.inf)
        if g.support_radius is not None:
            # every |xi + 2 pi k| >= |r|, so all terms vanish once sigma |r| > R
            term = np.where(sJ1 * rn > g.support_radius, 0.0, term)
        ratio = ws.sigma_min(1)
        if 2 * env.p > n and ratio > 1.0:
            # sum_k |r + 2 pi k|^-2p <= |r|^-2p + sum_{m>=1} shell(m) (pi (2m - 1))^-2p
            two_p = 2 * env.p
            shells = sum(((2 * m + 1) ** n - (2 * m - 1) ** n) * (math.pi * (2 * m - 1)) ** (-two_p)
                         for m in range(1, 2001))
            # m > 2000: shell(m) <= 2n (3m)^(n-1) and 2m - 1 >= m
            shells += 2 * n * 3 ** (n - 1) * math.pi ** (-two_p) * 2000 ** (n - two_p) / (two_p - n)
            with np.errstate(divide="ignore"):
                lattice = rn ** (-two_p) + shells
            geo = env.C ** 2 * (env.s * sJ1) ** (-two_p) * lattice / (1.0 - ratio ** (-two_p))
            term = np.minimum(term, geo)
        bar += term
    return bar


def v0_trace(ws: WaveletSystem, T: PositiveOperator, xis, W: IndexWindow, depth: int | None = None):
    """sum_psi sum_{j=1}^J <T f^j, f^j> with window and depth tail bounds."""
    if not ws.claimed_semiorthogonal:
        raise ValueError("v0_trace needs a semiorthogonal wavelet")
    J = ws.scale_depth if depth is None else depth
    pts = as_points(xis, ws.dimension)
    if J == 0:
        return np.zeros(pts.shape[0]), np.zeros(pts.shape[0])
    qa = quasi_affine_system(ws, J)
    vals, bars = trace_values(qa, T, pts, W, unchecked=True)
    scale = T.identity_scale + float(np.linalg.norm(T.matrix, 2))
    return vals, bars + scale * _depth_tail(ws, pts, J)


def v0_restricted(ws: WaveletSystem, f, xis, W: IndexWindow, depth: int | None = None) -> np.ndarray:
    """sum_psi sum_j |sum_k psi^((A*)^j (xi + 2 k pi)) conj f_k|^2."""
    J = ws.scale_depth if depth is None else depth
    pts = as_points(xis, ws.dimension)
    f = np.asarray(f, dtype=complex)
    out = np.zeros(pts.shape[0])
    base = pts[:, None, :] + 2 * math.pi * W.indices[None]
    for j in range(1, J + 1):
        M = ws.power(j)
        for g in ws.psis:
            out += np.abs(g.evaluate(base @ M.T) @ np.conj(f)) ** 2
    return out


def wavelet_dimension_function(ws: WaveletSystem, grid, W: IndexWindow, depth: int | None = None) -> TraceProfile:
    """D_Psi(xi) = sum_k sum_psi sum_{j>=1} |psi^((A*)^j (xi + 2 k pi))|^2, truncated."""
    J = ws.scale_depth if depth is None else depth
    pts = as_points(grid, ws.dimension)
    vals = np.zeros(pts.shape[0])
    bars = np.zeros(pts.shape[0])
    base = pts[:, None, :] + 2 * math.pi * W.indices[None]
    for j in range(1, J + 1):
        M = ws.power(j)
        for g in ws.psis:
            vals += np.sum(np.abs(g.evaluate(base @ M.T)) ** 2, axis=1)
            bars += scaled_spectrum(ws, g, j).window_tail(pts, W.radius)
    bars += _depth_tail(ws, pts, J)
    return TraceProfile(pts, vals, bars, "wavelet dimension function")


# -- scaling function relations --------------------------------------------------------

def _phi_cross(phis: GeneratorSystem, pts: np.ndarray, s: np.ndarray) -> np.ndarray:
    shifted = pts + 2 * math.pi * s
    out = np.zeros(pts.shape[0], dtype=complex)
    for g in phis:
        out += g.evaluate(pts) * np.conj(g.evaluate(shifted))
    return out


def scaling_wavelet_match(ws: WaveletSystem, phis: GeneratorSystem, grid, s_range: int = 8,
                          tol: float = 1e-9, depth: int | None = None) -> Certificate:
    """sum_psi sum_{j>=1} psi^((A*)^j xi) conj psi^((A*)^j (xi + 2 s pi)) = sum_phi phi^(xi) conj phi^(xi + 2 s pi)."""
    if not ws.claimed_semiorthogonal:
        raise ValueError("scaling_wavelet_match needs a semiorthogonal wavelet")
    J = ws.scale_depth if depth is None else depth
    pts = as_points(grid, ws.dimension)
    res = np.zeros(pts.shape[0])
    bars = np.zeros(pts.shape[0])
    worst_s = None
    for s in s_values(ws, s_range, outside_only=False):
        lhs, bar = _cross_sum(ws, pts, s, 1, J)
        r = np.abs(lhs - _phi_cross(phis, pts, s))
        if worst_s is None or r.max() > res.max():
            worst_s = s.tolist()
        upd = r > res
        res = np.where(upd, r, res)
        bars = np.where(upd, bar, bars)
    cert = worst("scaling-match", res, tol, bars, pts,
                 {"scaling": phis.name, "wavelet": ws.psis.name, "s_range": s_range, "depth": J})
    cert.witness["s"] = worst_s
    return cert


def mra_consistency(ws: WaveletSystem, phis: GeneratorSystem, grid, s_range: int = 8, tol: float = 1e-9,
                    flip_sign: bool = False) -> Certificate:
    """Magnitude and sign relations between a semiorthogonal wavelet and its scaling system.

        sum_psi |psi^(xi)|^2 = sum_phi |phi^((A*)^-1 xi)|^2 - sum_phi |phi^(xi)|^2
        sum_psi psi^(xi) conj psi^(xi + 2 s pi) = - sum_phi phi^(xi) conj phi^(xi + 2 s pi),  s not in A* Z^n

    ``flip_sign`` negates the right side of the second relation (negative control).
    """
    pts = as_points(grid, ws.dimension)
    Binv = ws.power(-1)
    lhs = sum(np.abs(g.evaluate(pts)) ** 2 for g in ws.psis)
    rhs = sum(_abs2_at(g, pts, Binv) for g in phis) - sum(np.abs(g.evaluate(pts)) ** 2 for g in phis)
    mag = np.abs(lhs - rhs)
    sign = 1.0 if flip_sign else -1.0
    cross = np.zeros(pts.shape[0])
    worst_s = None
    for s in s_values(ws, s_range):
        shifted = pts + 2 * math.pi * s
        left = sum(g.evaluate(pts) * np.conj(g.evaluate(shifted)) for g in ws.psis)
        r = np.abs(left - sign * _phi_cross(phis, pts, s))
        if worst_s is None or r.max() > cross.max():
            worst_s = s.tolist()
        cross = np.maximum(cross, r)
    cert = worst("mra", np.maximum(mag, cross), tol, 0.0, pts,
                 {"scaling": phis.name, "wavelet": ws.psis.name, "magnitude_residual": float(mag.max(initial=0.0)),
                  "sign_residual": float(cross.max(initial=0.0)), "flip_sign": flip_sign})
    if cross.max(initial=0.0) >= mag.max(initial=0.0):
        cert.witness["s"] = worst_s
    return cert


def semiorthogonality_spot_check(ws: WaveletSystem, xis, W: IndexWindow, tol: float = 1e-8) -> Certificate:
    """W_0 orthogonal to W_1 at sampled points: cross fibers of Psi and D_A Psi."""
    pts = as_points(xis, ws.dimension)
    dil = dilate_system(ws.psis, ws.dilation)
    res = np.array([cross_fiber_norm(ws.psis, dil, p[None], W) for p in pts])
    _, t1 = fiber_stack(ws.psis, pts, W)
    _, t2 = fiber_stack(dil, pts, W)
    bars = np.sqrt(t1.sum(axis=1) * t2.sum(axis=1)) + np.sqrt(t1.sum(axis=1)) + np.sqrt(t2.sum(axis=1))
    return worst("semiorthogonality", res, tol, bars, pts, {"dilation": ws.dilation.tolist()})


def full_space_system(ws: WaveletSystem, depth: int | None = None, up_levels: int | None = None,
                      W: IndexWindow | None = None) -> GeneratorSystem:
    """Quasi-affine system for all of L2: psi^((A*)^j xi) for 0 <= j <= J, and for
    1 <= j <= up_levels the |det A|^j translates |det|^(-j/2) psi^((A*)^-j xi) e^{-i <(A*)^-j xi, r>}."""
    J = ws.scale_depth if depth is None else depth
    if up_levels is None:
        reach = 2 * math.pi * ((W.radius if W is not None else 8) + 1)
        up_levels = max(1, math.ceil(math.log(reach / math.pi) / math.log(ws.sigma_min(1))) + 1)
    gens = [scaled_spectrum(ws, g, j) for j in range(0, J + 1) for g in ws.psis]
    det = abs(ws.dilation.determinant)
    for j in range(1, up_levels + 1):
        Aj = DilationMatrix(tuple(tuple(int(round(v)) for v in row) for row in ws.power(j).T))
        # translates by representatives of Z^n / A^j Z^n (A^j = ((A*)^j)*)
        for rep in coset_representatives(Aj.transpose()):
            for g in ws.psis:
                ph = np.array(rep, dtype=float) if any(rep) else None
                gens.append(compose(g, ws.power(-j), f"{g.name}@A*^-{j}T{list(rep)}", det ** (-j / 2), ph))
    return GeneratorSystem(tuple(gens), ws.dimension, "unverified", f"quasi-affine({ws.psis.name})")
