"""Local trace functions and executable checks of their structural identities.

For an NTF generator Phi of a shift-invariant space V and a positive
operator T on l2(Z^n),

    tau_{V,T}(xi) = Trace(T J(xi)) = sum_phi <T v_phi(xi), v_phi(xi)>,

with v_phi(xi) the fiber of phi at xi and J(xi) the range projection.
Operators are modelled as c I + M with M supported on the index window, so
the fiber sum of the M part is exact on the window and only the identity
part sees the fiber tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gramian import _orthonormal_basis, certify_ntf, fiber_stack, grid_map
from .lattice import (DilationMatrix, IndexWindow, coset_representatives, embed_operator,
                      shift_operator)
from .results import FAIL, PASS, UNTESTABLE, Certificate, worst
from .spectra import (GeneratorSystem, as_points, dilate_system, modulate, periodize, recenter,
                      sample_grid)

DEFAULT_SEED = 0x5EED
SENTINEL = 1e300


class CertificationError(RuntimeError):
    """Raised when a trace is requested for a system that failed NTF certification."""


# -- operators -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PositiveOperator:
    """T = identity_scale * I + matrix, with matrix living on the window."""

    window: IndexWindow
    matrix: np.ndarray = field(repr=False)
    identity_scale: float = 0.0
    label: str = ""
    dropped: float = 0.0  # trace of the finite part lost to window truncation

    @property
    def finite(self) -> bool:
        return self.identity_scale == 0.0

    @property
    def dense(self) -> np.ndarray:
        """Windowed matrix of the whole operator."""
        return self.matrix + self.identity_scale * np.eye(self.window.size)

    def trace_finite(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def quadratic(self, V: np.ndarray) -> np.ndarray:
        """<T v, v> summed over the generator axis of V (..., L, N) -> (...)."""
        out = np.zeros(V.shape[:-2])
        if self.identity_scale:
            out = out + self.identity_scale * np.sum(np.abs(V) ** 2, axis=(-2, -1))
        if np.any(self.matrix):
            TV = V @ self.matrix.T  # rows: (T v)^T
            out = out + np.real(np.sum(TV * np.conj(V), axis=(-2, -1)))
        return out

    def __add__(self, other: "PositiveOperator") -> "PositiveOperator":
        if other.window.radius != self.window.radius or other.window.dimension != self.window.dimension:
            raise ValueError("operators live on different windows")
        return PositiveOperator(self.window, self.matrix + other.matrix,
                                self.identity_scale + other.identity_scale,
                                f"({self.label}+{other.label})", self.dropped + other.dropped)

    def scaled(self, c: float) -> "PositiveOperator":
        if c < 0:
            raise ValueError("positive operators only scale by c >= 0")
        return PositiveOperator(self.window, c * self.matrix, c * self.identity_scale,
                                f"{c!r}*{self.label}", c * self.dropped)

    def conjugate_shift(self, k) -> "PositiveOperator":
        """lambda(k) T lambda(k)*, with lost diagonal mass recorded in ``dropped``."""
        S = shift_operator(k, self.window)
        # lambda(k) sends coordinate l to l + k; lost coordinates are those leaving W
        lost = float(np.real(np.sum(np.diag(self.matrix)[S.dropped_positions])))
        M = S.matrix @ self.matrix @ S.matrix.T
        return PositiveOperator(self.window, M, self.identity_scale,
                                f"lambda{tuple(np.atleast_1d(k).tolist())}{self.label}", self.dropped + lost)

    def conjugate_embed(self, d, A: DilationMatrix) -> "PositiveOperator":
        """D_d* T D_d.  Exact: the finite part vanishes outside the window."""
        E = embed_operator(d, A, self.window).matrix
        M = E.T @ self.matrix @ E
        return PositiveOperator(self.window, M, self.identity_scale,
                                f"D{tuple(np.atleast_1d(d).tolist())}*{self.label}", self.dropped)


def _check_psd(M: np.ndarray, label: str):
    nrm = float(np.linalg.norm(M, 2)) if M.size else 0.0
    if np.abs(M - M.conj().T).max(initial=0.0) > 1e-13 * max(nrm, 1.0):
        raise ValueError(f"operator {label} is not Hermitian")
    if M.size and float(np.linalg.eigvalsh(M).min()) < -1e-10 * max(nrm, 1e-300):
        raise ValueError(f"operator {label} is not positive semidefinite")


def identity(W: IndexWindow, scale: float = 1.0) -> PositiveOperator:
    return PositiveOperator(W, np.zeros((W.size, W.size), dtype=complex), float(scale), "I")


def rank_one(f, W: IndexWindow, label: str = "P_f") -> PositiveOperator:
    """P_f v = <v, f> f."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (W.size,):
        raise ValueError("vector does not match the window")
    return PositiveOperator(W, np.outer(f, np.conj(f)), 0.0, label)


def delta(k, W: IndexWindow) -> PositiveOperator:
    return rank_one(W.delta(k), W, f"P_delta{tuple(np.atleast_1d(k).tolist())}")


def from_matrix(M, W: IndexWindow, label: str = "T") -> PositiveOperator:
    M = np.asarray(M, dtype=complex)
    if M.shape != (W.size, W.size):
        raise ValueError("matrix does not match the window")
    _check_psd(M, label)
    return PositiveOperator(W, 0.5 * (M + M.conj().T), 0.0, label)


def random_psd(W: IndexWindow, rng: np.random.Generator, rank: int = 3, support: int | None = None,
               label: str = "random") -> PositiveOperator:
    """B B^H with B supported on coordinates |k|_inf <= support (default: whole window)."""
    N = W.size
    rows = np.arange(N) if support is None else np.nonzero(np.all(np.abs(W.indices) <= support, axis=1))[0]
    B = np.zeros((N, rank), dtype=complex)
    B[rows] = rng.standard_normal((rows.size, rank)) + 1j * rng.standard_normal((rows.size, rank))
    B /= math.sqrt(2 * rows.size)
    return PositiveOperator(W, B @ B.conj().T, 0.0, label)


def unit_vectors(W: IndexWindow, count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((count, W.size)) + 1j * rng.standard_normal((count, W.size))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def probe_basket(W: IndexWindow, seed: int = DEFAULT_SEED, n_random: int = 32):
    """All window deltas followed by n_random seeded unit vectors, with labels."""
    vecs = np.vstack([np.eye(W.size, dtype=complex), unit_vectors(W, n_random, seed)])
    labels = [f"delta{tuple(int(c) for c in k)}" for k in W.indices] + [f"random[{i}]" for i in range(n_random)]
    return vecs, labels


# -- certified systems -------------------------------------------------------------

@dataclass(frozen=True)
class CertifiedSystem:
    system: GeneratorSystem
    certificate: Certificate

    @property
    def dimension(self) -> int:
        return self.system.dimension

    @property
    def name(self) -> str:
        return self.system.name


def certification_grid(n: int) -> np.ndarray:
    return sample_grid(n, 256 if n == 1 else 24)


def certify(sys: GeneratorSystem, W: IndexWindow, grid=None, tol: float = 1e-8,
            unchecked: bool = False) -> CertifiedSystem:
    """Projection-mode certificate; FAIL raises CertificationError unless unchecked."""
    grid = certification_grid(sys.dimension) if grid is None else grid
    cert = certify_ntf(sys, grid, W, tol)
    if cert.verdict == FAIL and not unchecked:
        raise CertificationError(
            f"{sys.name} is not an NTF generator (eigenvalue {cert.witness.get('eigenvalue')!r} "
            f"at xi={cert.witness.get('xi')}); quasi-orthogonalize it first")
    return CertifiedSystem(sys, cert)


def _require(sys, unchecked: bool) -> GeneratorSystem:
    if isinstance(sys, CertifiedSystem):
        return sys.system
    if unchecked:
        return sys
    raise CertificationError("trace functions need a certified NTF system (see trace.certify)"
                             " or unchecked=True")


def _check_window(T: PositiveOperator, W: IndexWindow):
    if T.window.radius != W.radius or T.window.dimension != W.dimension:
        raise ValueError(f"operator window (radius {T.window.radius}) does not match W (radius {W.radius})")


# -- trace values -------------------------------------------------------------------

@dataclass
class TraceProfile:
    points: np.ndarray
    values: np.ndarray
    truncation_error: np.ndarray
    provenance: str
    flags: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        from .results import profile_csv
        return profile_csv(self.points, self.values, self.truncation_error)


def trace_values(sys, T: PositiveOperator, xis, W: IndexWindow, unchecked: bool = False):
    """Fiber-sum tau_{V,T} on a set of points: (values, error bars)."""
    gs = _require(sys, unchecked)
    _check_window(T, W)
    pts = as_points(xis, gs.dimension)

    def chunk(p):
        F, tails = fiber_stack(gs, p, W)
        vals = T.quadratic(F)
        bars = T.identity_scale * tails.sum(axis=1)
        if T.dropped:
            bars = bars + 2.0 * math.sqrt(T.dropped * max(T.trace_finite(), 0.0)) + T.dropped
        return vals, bars

    parts = grid_map(chunk, pts)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def local_trace(sys, T: PositiveOperator, xi, W: IndexWindow, unchecked: bool = False,
                cross_check: bool = False):
    """tau_{V,T}(xi) with its error bar; with cross_check also Trace(T P) - value."""
    vals, bars = trace_values(sys, T, xi, W, unchecked)
    if vals.size != 1:
        raise ValueError("local_trace takes one point; use trace_values for a grid")
    if not cross_check:
        return float(vals[0]), float(bars[0])
    proj = projection_trace(sys, T, xi, W, unchecked)
    return float(vals[0]), float(bars[0]), float(proj[0] - vals[0])


def projection_trace(sys, T: PositiveOperator, xis, W: IndexWindow, unchecked: bool = False,
                     tol: float = 1e-8) -> np.ndarray:
    """Trace(T P(xi)) with P the eigen-projection onto the windowed fiber span."""
    gs = _require(sys, unchecked)
    _check_window(T, W)
    pts = as_points(xis, gs.dimension)
    F, _ = fiber_stack(gs, pts, W)
    out = np.zeros(pts.shape[0])
    for m in range(pts.shape[0]):
        Q, _, _ = _orthonormal_basis(F[m], tol)
        # rows of Q.T form an orthonormal basis of the fiber span
        out[m] = T.quadratic(Q.T[None])[0]
    return out


def restricted_values(sys, f: np.ndarray, xis, W: IndexWindow, unchecked: bool = False) -> np.ndarray:
    """tau_{V,f}(xi) = sum_phi |<f, v_phi(xi)>|^2 for each point; f may be (P, N) for P probes."""
    gs = _require(sys, unchecked)
    f = np.asarray(f, dtype=complex)
    single = f.ndim == 1
    probes = f[None] if single else f
    if probes.shape[1] != W.size:
        raise ValueError("vector does not match the window")
    pts = as_points(xis, gs.dimension)

    def chunk(p):
        F, _ = fiber_stack(gs, p, W)
        inner = np.conj(F) @ probes.T  # (M, L, P): <f, v> = sum f conj(v)
        return np.sum(np.abs(inner) ** 2, axis=1)

    out = np.concatenate(grid_map(chunk, pts))
    return out[:, 0] if single else out


def restricted_trace(sys, f, xi, W: IndexWindow, unchecked: bool = False, cross_check: bool = False):
    val = float(restricted_values(sys, f, xi, W, unchecked)[0])
    if not cross_check:
        return val
    gs = _require(sys, unchecked)
    F, _ = fiber_stack(gs, as_points(xi, gs.dimension), W)
    Q, _, _ = _orthonormal_basis(F[0], 1e-8)
    proj = float(np.sum(np.abs(Q.conj().T @ np.asarray(f, dtype=complex)) ** 2))
    return val, proj - val


def dimension_function(sys, grid, W: IndexWindow, unchecked: bool = False) -> TraceProfile:
    gs = _require(sys, unchecked)
    pts = as_points(grid, gs.dimension)
    vals, bars = trace_values(sys, identity(W), pts, W, unchecked)
    flags = {}
    if len(gs) == 1:
        per, _ = periodize(gs.generators[0], pts, W)
        if np.all(np.minimum(np.abs(per), np.abs(per - 1.0)) <= 1e-6):
            dev = np.abs(vals - np.round(vals))
            flags["max_integer_deviation"] = float(dev.max(initial=0.0))
            flags["non_integer"] = bool(np.any(dev > 1e-6 + bars))
    return TraceProfile(pts, vals, bars, "fiber-sum", flags)


def spectral_function(sys, grid, W: IndexWindow, unchecked: bool = False) -> TraceProfile:
    """sigma_V(xi) = tau_{V, delta_k}(xi - 2 pi k) with xi - 2 pi k in [-pi, pi)^n."""
    gs = _require(sys, unchecked)
    pts = as_points(grid, gs.dimension)
    r, k = recenter(pts)
    pos = W.positions(k)
    if np.any(pos < 0):
        raise ValueError("grid reaches beyond the index window; enlarge the window")
    F, _ = fiber_stack(gs, r, W)
    vals = np.sum(np.abs(F[np.arange(pts.shape[0]), :, pos]) ** 2, axis=1)
    return TraceProfile(pts, vals, np.zeros(pts.shape[0]), "restricted fiber-sum, recentred deltas")


def operator_trace(T: PositiveOperator, family) -> float:
    """sum_i <T e_i, e_i> over a family (rows) that is an NTF of the window space."""
    E = np.atleast_2d(np.asarray(family, dtype=complex))
    return float(T.quadratic(E[None])[0])


# -- identity checks ----------------------------------------------------------------

def check_periodicity(sys, T: PositiveOperator, xis, k, W: IndexWindow, tol: float = 1e-9,
                      unchecked: bool = False) -> Certificate:
    """tau_{V,T}(xi + 2 pi k) against tau_{V, lambda(k) T lambda(k)*}(xi)."""
    gs = _require(sys, unchecked)
    pts = as_points(xis, gs.dimension)
    k = np.atleast_1d(np.asarray(k, dtype=np.int64))
    Tk = T.conjugate_shift(k)
    if Tk.dropped - T.dropped > tol:
        return Certificate("periodicity", UNTESTABLE, math.nan, tol, 0.0,
                           {"dropped_weight": Tk.dropped - T.dropped}, {"k": k.tolist()})
    lhs, b1 = trace_values(sys, T, pts + 2 * math.pi * k, W, unchecked)
    rhs, b2 = trace_values(sys, Tk, pts, W, unchecked)
    return worst("periodicity", np.abs(lhs - rhs), tol, b1 + b2, pts, {"k": k.tolist(), "operator": T.label})


def check_linearity(sys, T: PositiveOperator, S: PositiveOperator, xis, W: IndexWindow,
                    f=None, tol: float = 1e-10, unchecked: bool = False) -> Certificate:
    pts = as_points(xis, _require(sys, unchecked).dimension)
    tT, bT = trace_values(sys, T, pts, W, unchecked)
    tS, bS = trace_values(sys, S, pts, W, unchecked)
    tTS, bTS = trace_values(sys, T + S, pts, W, unchecked)
    res = [np.abs(tTS - tT - tS)]
    bars = [bT + bS + bTS]
    for lam in (0.0, 0.5, 2.0):
        tl, bl = trace_values(sys, T.scaled(lam), pts, W, unchecked)
        res.append(np.abs(tl - lam * tT))
        bars.append(bl + lam * bT)
    if f is not None:
        f = np.asarray(f, dtype=complex)
        res.append(np.abs(restricted_values(sys, 1j * f, pts, W, unchecked)
                          - restricted_values(sys, f, pts, W, unchecked)))
        bars.append(np.zeros(pts.shape[0]))
    return worst("linearity", np.max(res, axis=0), tol, np.max(bars, axis=0), pts)


def cross_fiber_norm(a: GeneratorSystem, b: GeneratorSystem, xis, W: IndexWindow) -> float:
    """max over points of |<v_phi, w_psi>| for phi in a, psi in b."""
    if len(a) == 0 or len(b) == 0:
        return 0.0
    Fa, _ = fiber_stack(a, xis, W)
    Fb, _ = fiber_stack(b, xis, W)
    return float(np.abs(np.conj(Fa) @ np.transpose(Fb, (0, 2, 1))).max())


def check_additivity(systems, T: PositiveOperator, xis, W: IndexWindow, tol: float = 1e-10,
                     orth_tol: float = 1e-10, unchecked: bool = False) -> Certificate:
    """tau_{sum V_i, T} = sum tau_{V_i, T} for mutually orthogonal V_i."""
    gss = [_require(s, unchecked) for s in systems]
    n = gss[0].dimension
    pts = as_points(xis, n)
    for i in range(len(gss)):
        for j in range(i + 1, len(gss)):
            c = cross_fiber_norm(gss[i], gss[j], pts, W)
            if c > orth_tol:
                raise ValueError(f"systems {gss[i].name} and {gss[j].name} are not orthogonal (cross {c:.3g})")
    union = GeneratorSystem(sum((g.generators for g in gss), ()), n, "unverified", "(+)".join(g.name for g in gss))
    lhs, bl = trace_values(union, T, pts, W, unchecked=True)
    total = np.zeros(pts.shape[0])
    bars = bl.copy()
    for s in systems:
        v, b = trace_values(s, T, pts, W, unchecked)
        total += v
        bars += b
    return worst("additivity", np.abs(lhs - total), tol, bars, pts, {"operator": T.label})


def check_monotony(small, big, xis, W: IndexWindow, tol: float = 1e-10, seed: int = DEFAULT_SEED,
                   n_random: int = 32, unchecked: bool = False) -> Certificate:
    """tau_{small, P_f} <= tau_{big, P_f} over the probe basket at every point."""
    gs = _require(small, unchecked)
    pts = as_points(xis, gs.dimension)
    probes, labels = probe_basket(W, seed, n_random)
    a = restricted_values(small, probes, pts, W, unchecked)
    b = restricted_values(big, probes, pts, W, unchecked)
    excess = np.maximum(a - b, 0.0)
    per_point = excess.max(axis=1)
    cert = worst("monotony", per_point, tol, 0.0, pts, {"seed": seed, "probes": len(labels)})
    m = cert.witness.get("index", 0)
    p = int(np.argmax(excess[m]))
    cert.witness.update({"probe": labels[p], "small": float(a[m, p]), "big": float(b[m, p])})
    return cert


def check_modulation(sys, a, T: PositiveOperator, xis, W: IndexWindow, tol: float = 1e-10,
                     unchecked: bool = False) -> Certificate:
    """tau_{M_a V, T}(xi) against tau_{V,T}(xi - a); the modulated system is recertified."""
    gs = _require(sys, unchecked)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    pts = as_points(xis, gs.dimension)
    mod = gs.map(lambda g: modulate(g, a), f"M{a.tolist()}({gs.name})")
    cmod = certify(mod, W, unchecked=unchecked)
    lhs, b1 = trace_values(cmod, T, pts, W, unchecked)
    rhs, b2 = trace_values(sys, T, pts - a, W, unchecked)
    return worst("modulation", np.abs(lhs - rhs), tol, b1 + b2, pts,
                 {"a": a.tolist(), "operator": T.label, "recertified": cmod.certificate.verdict})


def is_quasi_orthogonal(gs: GeneratorSystem, W: IndexWindow, grid=None, tol: float = 1e-6) -> bool:
    grid = certification_grid(gs.dimension) if grid is None else grid
    for g in gs:
        per, tail = periodize(g, grid, W)
        if np.any(np.minimum(np.abs(per), np.abs(per - 1.0)) > tol + tail):
            return False
    return True


def check_dilation(sys, A: DilationMatrix, T: PositiveOperator, xis, W: IndexWindow, tol: float = 1e-9,
                   unchecked: bool = False, reps=None) -> Certificate:
    """tau_{D_A V, T}(xi) = sum_d tau_{V, D_d* T D_d}((A*)^-1 (xi + 2 pi d)), d over Z^n / A* Z^n.

    ``reps`` overrides the canonical coset representatives; any complete set
    should give the same right-hand side.
    """
    gs = _require(sys, unchecked)
    if not is_quasi_orthogonal(gs, W):
        raise ValueError(f"{gs.name} is not quasi-orthogonal; run quasi_orthogonalize first")
    pts = as_points(xis, gs.dimension)
    dil = certify(dilate_system(gs, A), W, unchecked=unchecked)
    lhs, bars = trace_values(dil, T, pts, W, unchecked)
    Binv = np.linalg.inv(A.star.array.astype(float))
    rhs = np.zeros(pts.shape[0])
    reps = coset_representatives(A) if reps is None else [tuple(int(c) for c in d) for d in reps]
    for d in reps:
        Td = T.conjugate_embed(d, A)
        shifted = (pts + 2 * math.pi * np.asarray(d, dtype=float)) @ Binv.T
        v, b = trace_values(sys, Td, shifted, W, unchecked)
        rhs += v
        bars = bars + b
    return worst("dilation", np.abs(lhs - rhs), tol, bars, pts,
                 {"A": A.tolist(), "cosets": [list(d) for d in reps], "operator": T.label})


def check_monotone_convergence(profiles, limit, weights, tol: float = 1e-10, error_bars=None,
                               halving_rtol: float | None = None) -> Certificate:
    """Pointwise nondecrease of a profile sequence and shrinking L1 distance to the limit.

    ``profiles`` is a (J, M) array over a common grid, ``weights`` the
    quadrature weights.  With ``halving_rtol`` the ratio of consecutive gaps
    must also be 1/2 within that relative tolerance.
    """
    P = np.asarray(profiles, dtype=float)
    limit = np.broadcast_to(np.asarray(limit, dtype=float), P.shape[1:])
    bars = np.zeros_like(P) if error_bars is None else np.asarray(error_bars, dtype=float)
    drops = np.maximum(P[:-1] - P[1:] - bars[:-1] - bars[1:], 0.0) if len(P) > 1 else np.zeros((0, P.shape[1]))
    gaps = np.abs(P - limit) @ np.asarray(weights, dtype=float)
    growth = np.maximum(np.diff(gaps), 0.0)
    details = {"l1_gaps": gaps.tolist()}
    ratios = [gaps[j + 1] / gaps[j] if gaps[j] > 0 else math.nan for j in range(len(gaps) - 1)]
    details["gap_ratios"] = ratios
    res = max(float(drops.max(initial=0.0)), float(growth.max(initial=0.0)))
    witness = {}
    if drops.size and drops.max() > tol:
        j, m = np.unravel_index(int(np.argmax(drops)), drops.shape)
        witness = {"j": int(j), "index": int(m), "drop": float(drops[j, m])}
    elif growth.size and growth.max() > tol:
        witness = {"j": int(np.argmax(growth)), "gap_growth": float(growth.max())}
    verdict = PASS if res <= tol else FAIL
    if halving_rtol is not None:
        ok = [abs(r - 0.5) <= halving_rtol * 0.5 if math.isfinite(r) else False for r in ratios]
        details["halving"] = ok
        if not all(ok):
            verdict = FAIL
            witness.setdefault("halving_step", ok.index(False))
    return Certificate("monotone-convergence", verdict, res, tol, 0.0, witness, details)


def trace_data_differ(a, b, xis, W: IndexWindow, seed: int = DEFAULT_SEED, tol: float = 1e-8,
                      unchecked: bool = False):
    """Witness (point index, probe label, difference) that the trace data of a and b differ, or None."""
    pts = as_points(xis, _require(a, unchecked).dimension)
    probes, labels = probe_basket(W, seed)
    diff = np.abs(restricted_values(a, probes, pts, W, unchecked) - restricted_values(b, probes, pts, W, unchecked))
    if diff.max() <= tol:
        return None
    m, p = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return int(m), labels[p], float(diff[m, p])
