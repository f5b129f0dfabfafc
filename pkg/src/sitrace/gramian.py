"""Fiber Gramians, dual Gramians, range projections and NTF certificates.

For a finite system Phi and base point xi the fibers v_phi = (phi^(xi + 2 pi k))_k
are stacked as rows of an L x N matrix F (N = window size).  Then

    Gramian       G = conj(F) F^T   (L x L),   G_ij = <v_i, v_j>
    dual Gramian  D = F^T conj(F)   (N x N),   D_rs = sum_phi v_phi(r) conj v_phi(s)

and the nonzero spectra of G and D coincide.  Windowed entries of D are
exact; the window only loses the mass t = sum_phi sum_{k outside} |phi^|^2,
and by Weyl's inequality every windowed eigenvalue lies in [mu - t, mu].
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lattice import IndexWindow
from .results import FAIL, INCONCLUSIVE, PASS, Certificate, worst
from .spectra import GeneratorSystem, as_points, fiber_values

MODES = ("projection", "delta", "gramian-match")


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SITRACE_THREADS", "1")))
    except ValueError:
        return 1


def grid_map(fn, xis: np.ndarray, chunk: int = 256) -> list:
    """Apply fn to consecutive chunks of xis; results come back in grid order."""
    pieces = [xis[i:i + chunk] for i in range(0, xis.shape[0], chunk)] or [xis]
    threads = thread_count()
    if threads == 1 or len(pieces) == 1:
        return [fn(p) for p in pieces]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, pieces))


def fiber_stack(sys: GeneratorSystem, xis, W: IndexWindow) -> tuple[np.ndarray, np.ndarray]:
    """Windowed fibers (M, L, N) and their tail bounds (M, L)."""
    if W.dimension != sys.dimension:
        raise ValueError("window dimension does not match system")
    pts = as_points(xis, sys.dimension)
    M, L, N = pts.shape[0], len(sys), W.size
    F = np.zeros((M, L, N), dtype=complex)
    tails = np.zeros((M, L))
    for i, g in enumerate(sys):
        F[:, i, :] = fiber_values(g, pts, W)
        tails[:, i] = g.window_tail(pts, W.radius)
    return F, tails


@dataclass
class FiberGramian:
    xi: np.ndarray
    matrix: np.ndarray
    tail_bound: float
    entry_bound: float = 0.0


@dataclass
class FiberDualGramian:
    xi: np.ndarray
    matrix: np.ndarray
    tail_bound: float


@dataclass
class RangeProjection:
    xi: np.ndarray
    matrix: np.ndarray
    rank: int
    ambiguous: bool = False
    ntf_distance: float | None = None
    basis: np.ndarray | None = field(default=None, repr=False)


def _single(sys, xi, W):
    pts = as_points(xi, sys.dimension)
    if pts.shape[0] != 1:
        raise ValueError("expected a single base point")
    F, tails = fiber_stack(sys, pts, W)
    return pts[0], F[0], tails[0]


def gramian(sys: GeneratorSystem, xi, W: IndexWindow) -> FiberGramian:
    x, F, t = _single(sys, xi, W)
    G = np.conj(F) @ F.T
    norms = np.sqrt(np.real(np.diag(G)).clip(0))
    st = np.sqrt(t)
    entry = 0.0
    if len(sys):
        entry = float(np.max(st[:, None] * st[None, :] + st[:, None] * norms[None, :] + norms[:, None] * st[None, :]))
    return FiberGramian(x, G, float(t.sum()), entry)


def dual_gramian(sys: GeneratorSystem, xi, W: IndexWindow) -> FiberDualGramian:
    x, F, t = _single(sys, xi, W)
    return FiberDualGramian(x, F.T @ np.conj(F), float(t.sum()))


def _orthonormal_basis(F: np.ndarray, tol: float, scale: float | None = None):
    """ONB (N x r) of the span of the rows of F, plus the eigenvalues of D."""
    if F.shape[0] == 0:
        return np.zeros((F.shape[1], 0), dtype=complex), np.zeros(0), False
    # D = F^T conj(F) = U S^2 U^H with U from the SVD of F^T
    U, s, _ = np.linalg.svd(F.T, full_matrices=False)
    eig = s ** 2
    ref = scale if scale is not None else (float(eig.max()) if eig.size else 0.0)
    cut = tol * ref if ref > 0 else tol
    keep = eig > cut
    ambiguous = bool(np.any((eig >= cut) & (eig <= math.sqrt(tol) * max(ref, 1e-300))))
    return U[:, keep], eig, ambiguous


def range_projection(sys: GeneratorSystem, xi, W: IndexWindow, tol: float = 1e-8,
                     ntf: bool = False, scale: float | None = None) -> RangeProjection:
    """Orthogonal projection onto the span of the windowed fibers.

    The rank cut is tol relative to ``scale`` (default: the largest
    eigenvalue at xi).  With ``ntf=True`` the dual Gramian itself is
    returned and its distance to the eigen-projection is recorded.
    """
    x, F, _ = _single(sys, xi, W)
    Q, _, ambiguous = _orthonormal_basis(F, tol, scale)
    P = Q @ Q.conj().T
    if ntf:
        D = F.T @ np.conj(F)
        return RangeProjection(x, D, Q.shape[1], ambiguous, float(np.linalg.norm(D - P, 2)), Q)
    return RangeProjection(x, P, Q.shape[1], ambiguous, None, Q)


def gramian_eigenvalues(sys: GeneratorSystem, xis, W: IndexWindow) -> tuple[np.ndarray, np.ndarray]:
    """Ascending Gramian eigenvalues (M, L) and total tail mass (M,) on a grid."""
    def chunk(pts):
        F, tails = fiber_stack(sys, pts, W)
        G = np.conj(F) @ np.transpose(F, (0, 2, 1))
        if G.shape[1] == 0:
            return np.zeros((pts.shape[0], 0)), tails.sum(axis=1)
        return np.linalg.eigvalsh(G), tails.sum(axis=1)

    pts = as_points(xis, sys.dimension)
    parts = grid_map(chunk, pts)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass
class FrameBounds:
    A: float
    B: float
    min_nonzero: np.ndarray
    max_eig: np.ndarray
    points: np.ndarray
    degenerate: bool = False

    def csv_rows(self):
        for p, lo, hi in zip(self.points, self.min_nonzero, self.max_eig):
            yield [*map(float, p), float(lo), float(hi)]


def frame_bounds(sys: GeneratorSystem, grid, W: IndexWindow, rank_tol: float = 1e-8) -> FrameBounds:
    pts = as_points(grid, sys.dimension)
    if pts.shape[0] == 0:
        raise ValueError("frame_bounds needs a nonempty grid")
    eig, _ = gramian_eigenvalues(sys, pts, W)
    top = float(eig.max()) if eig.size else 0.0
    if top <= 0.0:
        nan = np.full(pts.shape[0], np.nan)
        return FrameBounds(math.nan, math.nan, nan, np.zeros(pts.shape[0]), pts, True)
    cut = rank_tol * top
    masked = np.where(eig > cut, eig, np.inf)
    lo = masked.min(axis=1)
    lo = np.where(np.isfinite(lo), lo, np.nan)
    hi = eig.max(axis=1)
    return FrameBounds(float(np.nanmin(lo)), float(hi.max()), lo, hi, pts, False)


# -- certification -------------------------------------------------------------

def _projection_certificate(sys, pts, W, tol):
    eig, tail = gramian_eigenvalues(sys, pts, W)
    if eig.shape[1] == 0:
        return Certificate("ntf:projection", PASS, 0.0, tol, 0.0, {}, {"mode": "projection"})
    dist = np.minimum(np.abs(eig), np.abs(eig - 1.0))
    raw = dist.max(axis=1)
    t = tail[:, None]
    # distance to the set of values a true 0 or 1 can produce after truncation
    unexp = np.minimum(np.maximum(eig, 0.0) + np.maximum(-t - eig, 0.0),
                       np.maximum(0.0, (1.0 - t) - eig) + np.maximum(0.0, eig - 1.0))
    unexplained = unexp.max(axis=1)
    verdicts = np.where(raw <= tol, 0, np.where(unexplained <= tol, 1, 2))
    code = int(verdicts.max())
    verdict = (PASS, INCONCLUSIVE, FAIL)[code]
    if code == 2:
        # witness: the smallest eigenvalue that truncation cannot explain
        flagged = np.where(unexp > tol, eig, np.inf)
    else:
        flagged = np.where(dist >= raw.max(), eig, np.inf)
    idx, bad = np.unravel_index(int(np.argmin(flagged)), eig.shape)
    idx, bad = int(idx), int(bad)
    row = eig[idx]
    witness = {"index": idx, "xi": [float(v) for v in pts[idx]], "eigenvalue": float(row[bad]),
               "residual": float(raw[idx]), "error_bar": float(tail[idx])}
    return Certificate("ntf:projection", verdict, float(raw.max()), tol, float(tail[idx]), witness,
                       {"mode": "projection", "max_unexplained": float(unexplained.max()),
                        "max_tail": float(tail.max())})


def _delta_residuals(F: np.ndarray, tol: float) -> float:
    """max over r, s and alpha in {0, 1, i} of |q_D(d_r + alpha d_s) - q_P(...)|."""
    Q, _, _ = _orthonormal_basis(F, tol)
    E = F.T @ np.conj(F) - Q @ Q.conj().T
    d = np.real(np.diag(E))
    alpha0 = np.abs(d).max(initial=0.0)
    pair = d[:, None] + d[None, :]
    alpha1 = np.abs(pair + 2 * np.real(E)).max(initial=0.0)
    alphai = np.abs(pair - 2 * np.imag(E)).max(initial=0.0)
    return float(max(alpha0, alpha1, alphai))


def _delta_certificate(sys, pts, W, tol):
    F, tails = fiber_stack(sys, pts, W)
    res = np.array([_delta_residuals(F[m], 1e-8) for m in range(pts.shape[0])])
    cert = worst("ntf:delta", res, tol, tails.sum(axis=1), pts, {"mode": "delta"})
    return cert


def _match_certificate(sys, ref, pts, W, tol):
    if ref is None:
        raise ValueError("gramian-match mode needs a reference system")
    if ref.dimension != sys.dimension:
        raise ValueError("reference system dimension mismatch")
    F, t1 = fiber_stack(sys, pts, W)
    R, t2 = fiber_stack(ref, pts, W)
    res = np.zeros(pts.shape[0])
    for m in range(pts.shape[0]):
        D1 = F[m].T @ np.conj(F[m])
        D2 = R[m].T @ np.conj(R[m])
        res[m] = np.abs(D1 - D2).max(initial=0.0)
    return worst("ntf:gramian-match", res, tol, t1.sum(axis=1) + t2.sum(axis=1), pts,
                 {"mode": "gramian-match", "reference": ref.name})


def certify_ntf(sys: GeneratorSystem, grid, W: IndexWindow, tol: float = 1e-8,
                mode: str = "projection", reference: GeneratorSystem | None = None) -> Certificate:
    """Certify that the integer translates of sys form an NTF of their span.

    PASS/INCONCLUSIVE/FAIL as in ``results.judge``; INCONCLUSIVE means the
    residual is within what the window truncation can explain.
    """
    if mode not in MODES:
        raise ValueError(f"unknown certification mode {mode!r}; expected one of {MODES}")
    pts = as_points(grid, sys.dimension)
    if mode == "projection":
        cert = _projection_certificate(sys, pts, W, tol)
    elif mode == "delta":
        cert = _delta_certificate(sys, pts, W, tol)
    else:
        cert = _match_certificate(sys, reference, pts, W, tol)
    cert.details.update({"system": sys.name, "grid_points": int(pts.shape[0]), "window": W.radius})
    return cert


def full_space_check(sys: GeneratorSystem, grid, W: IndexWindow, tol: float = 1e-9,
                     error_bar: float = 0.0) -> Certificate:
    """sum_phi |phi^(xi)|^2 = 1 and sum_phi phi^(xi) conj phi^(xi + 2 pi l) = 0, l != 0 in W."""
    pts = as_points(grid, sys.dimension)
    zero = W.zero_position()

    def chunk(p):
        F, _ = fiber_stack(sys, p, W)
        if F.shape[1] == 0:
            return np.ones(p.shape[0]), np.zeros(p.shape[0])
        row = np.einsum("ml,mln->mn", F[:, :, zero], np.conj(F))
        first = np.abs(np.real(row[:, zero]) - 1.0)
        row[:, zero] = 0.0
        return first, np.abs(row).max(axis=1)

    parts = grid_map(chunk, pts)
    first = np.concatenate([p[0] for p in parts])
    cross = np.concatenate([p[1] for p in parts])
    cert = worst("full-space", np.maximum(first, cross), tol, error_bar, pts,
                 {"system": sys.name, "max_norm_residual": float(first.max(initial=0.0)),
                  "max_cross_residual": float(cross.max(initial=0.0))})
    return cert
