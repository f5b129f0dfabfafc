"""Generators described by their Fourier transforms.

A generator is stored as a closed-form evaluable ``xi -> g^(xi)`` under the
convention g^(xi) = int g(x) exp(-i <x, xi>) dx, together with decay
metadata that turns window truncation into a rigorous error bar:

    |g^(xi)| <= C (1 + s |xi|)^(-p)

plus optional compact support (g^ = 0 for |xi| > R), a spectral hole
(g^ = 0 for |xi| < h) and a small-scale bound |g^(xi)| <= c |xi|^q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .lattice import DilationMatrix, IndexWindow, coset_representatives

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Envelope:
    C: float
    p: float
    s: float = 1.0

    def __call__(self, r):
        return self.C * (1.0 + self.s * np.asarray(r)) ** (-self.p)


@dataclass(frozen=True, eq=False)
class GeneratorSpectrum:
    name: str
    dimension: int
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    envelope: Envelope
    support_radius: float | None = None
    hole_radius: float = 0.0
    small_scale: tuple[float, float] | None = None
    note: str = ""
    # optional override: (xis (M, n), K) -> (M,) bound on the mass outside the window
    tail_override: Callable | None = field(default=None, repr=False)

    def _points(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.dimension == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
            xi = xi[..., None]
        if xi.shape[-1] != self.dimension:
            raise ValueError(f"{self.name}: points of dimension {xi.shape[-1]}, expected {self.dimension}")
        return xi

    def evaluate(self, xi) -> np.ndarray:
        """g^ at points of shape (..., n); returns complex array of shape (...)."""
        pts = self._points(xi)
        return np.asarray(self.fn(pts), dtype=complex)

    def __call__(self, xi):
        return self.evaluate(xi)

    def window_tail(self, xis, K: int) -> np.ndarray:
        """Upper bound on sum_{|k|_inf > K} |g^(xi + 2 pi k)|^2 for each row of xis."""
        xis = self._points(xis).reshape(-1, self.dimension)
        if self.tail_override is not None:
            return self.tail_override(xis, K)
        return lattice_tail(self.envelope, self.support_radius, xis, K)


def lattice_tail(env: Envelope, support: float | None, xis: np.ndarray, K: int) -> np.ndarray:
    """Bound sum over k outside the radius-K box of env(|xi + 2 pi k|)^2.

    Uses |xi + 2 pi k|_2 >= 2 pi |k|_inf - |xi|_inf on every shell
    |k|_inf = m, an explicit shell sum for the first shells and an integral
    comparison for the rest.  Compactly supported spectra are handled by
    counting lattice points that can still meet the support.
    """
    xis = np.atleast_2d(xis)
    M, n = xis.shape
    x = np.max(np.abs(xis), axis=1)
    out = np.full(M, np.inf)
    if support is not None:
        out = np.minimum(out, env.C ** 2 * _outside_count(xis, support, K))
    if 2 * env.p > n:
        two_p = 2.0 * env.p
        m1 = int(max(K + 1, math.ceil(float(x.max()) / math.pi) + 1)) + 64
        total = np.zeros(M)
        for m in range(K + 1, m1):
            shell = (2 * m + 1) ** n - (2 * m - 1) ** n
            d = np.maximum(0.0, TWO_PI * m - x)
            total += shell * env.C ** 2 * (1.0 + env.s * d) ** (-two_p)
        # m >= m1 > |xi|_inf / pi: 1 + s d >= s pi m and shell <= 2n (3m)^(n-1)
        coef = 2 * n * 3 ** (n - 1) * env.C ** 2 * (env.s * math.pi) ** (-two_p)
        total += coef * (m1 - 1) ** (n - two_p) / (two_p - n)
        out = np.minimum(out, total)
    return out


def _outside_count(xis: np.ndarray, R: float, K: int) -> np.ndarray:
    # lattice points k outside the box with |xi + 2 pi k|_inf <= R
    lo = np.ceil((-R - xis) / TWO_PI)
    hi = np.floor((R - xis) / TWO_PI)
    total = np.prod(np.clip(hi - lo + 1, 0, None), axis=1)
    inside = np.prod(np.clip(np.minimum(hi, K) - np.maximum(lo, -K) + 1, 0, None), axis=1)
    return total - inside


@dataclass(frozen=True)
class GeneratorSystem:
    generators: tuple[GeneratorSpectrum, ...]
    dimension: int
    claimed_role: str = "unverified"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.claimed_role not in ("ntf-generator", "bessel", "frame", "unverified"):
            raise ValueError(f"unknown role {self.claimed_role!r}")
        for g in self.generators:
            if g.dimension != self.dimension:
                raise ValueError(f"generator {g.name} has dimension {g.dimension}, system has {self.dimension}")
        if not self.name:
            object.__setattr__(self, "name", "+".join(g.name for g in self.generators) or "empty")

    def __len__(self) -> int:
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def union(self, other: "GeneratorSystem", name: str = "") -> "GeneratorSystem":
        return GeneratorSystem(self.generators + other.generators, self.dimension, "unverified",
                               name or f"{self.name}|{other.name}")

    def map(self, f: Callable[[GeneratorSpectrum], GeneratorSpectrum], name: str = "") -> "GeneratorSystem":
        return GeneratorSystem(tuple(f(g) for g in self.generators), self.dimension,
                               "unverified", name)


def system(*generators: GeneratorSpectrum, role: str = "unverified", name: str = "",
           dimension: int | None = None) -> GeneratorSystem:
    if dimension is None:
        if not generators:
            raise ValueError("empty system needs an explicit dimension")
        dimension = generators[0].dimension
    return GeneratorSystem(tuple(generators), dimension, role, name)


@dataclass(frozen=True)
class FiberVector:
    window: IndexWindow
    values: np.ndarray
    tail_bound: float

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


# -- grids -------------------------------------------------------------------

def interval_grid(lo: float, hi: float, M: int) -> np.ndarray:
    """Half-step offset grid lo + (m + 1/2) h, h = (hi - lo) / M."""
    if M < 1:
        raise ValueError("grid resolution must be positive")
    h = (hi - lo) / M
    return lo + (np.arange(M) + 0.5) * h


def sample_grid(n: int, M: int) -> np.ndarray:
    """The (M**n, n) offset grid on [-pi, pi)^n in lexicographic order."""
    axis = interval_grid(-math.pi, math.pi, M)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def as_points(xis, n: int) -> np.ndarray:
    xis = np.asarray(xis, dtype=float)
    if n == 1 and (xis.ndim == 0 or xis.shape[-1] != 1):
        xis = xis[..., None]
    return xis.reshape(-1, n)


# -- fibers and periodization ------------------------------------------------

def fiber_values(g: GeneratorSpectrum, xis, W: IndexWindow) -> np.ndarray:
    """(M, N) array of g^(xi + 2 pi k), rows over xis, columns over W."""
    xis = as_points(xis, g.dimension)
    pts = xis[:, None, :] + TWO_PI * W.indices[None, :, :]
    return g.evaluate(pts)


def fiber(g: GeneratorSpectrum, xi, W: IndexWindow) -> FiberVector:
    xi = as_points(xi, g.dimension)
    if xi.shape[0] != 1:
        raise ValueError("fiber takes a single point; use fiber_values for a grid")
    vals = fiber_values(g, xi, W)[0]
    return FiberVector(W, vals, float(g.window_tail(xi, W.radius)[0]))


def periodize(g: GeneratorSpectrum, xis, W: IndexWindow) -> tuple[np.ndarray, np.ndarray]:
    """Windowed Per|g^|^2 at each point, with the tail bound as error bar."""
    vals = fiber_values(g, xis, W)
    return np.sum(np.abs(vals) ** 2, axis=1), g.window_tail(as_points(xis, g.dimension), W.radius)


def periodization(g: GeneratorSpectrum, xi, W: IndexWindow) -> tuple[float, float]:
    value, err = periodize(g, xi, W)
    return float(value[0]), float(err[0])


def recenter(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split points as r + 2 pi k with r in [-pi, pi)^n."""
    k = np.floor((pts + math.pi) / TWO_PI)
    return pts - TWO_PI * k, k.astype(np.int64)


# -- transformations -----------------------------------------------------------

def quasi_orthogonalize(g: GeneratorSpectrum, W: IndexWindow, tol: float = 1e-12) -> GeneratorSpectrum:
    """xi -> g^(xi) / sqrt(Per|g^|^2(xi)) where Per > tol, and 0 elsewhere.

    Per is evaluated with the window W centred at the representative of xi
    in [-pi, pi)^n, so the windowed periodization of the result is exactly
    0 or 1 up to rounding.
    """
    n = g.dimension
    offsets = TWO_PI * W.indices

    def per_at(r: np.ndarray) -> np.ndarray:
        flat = r.reshape(-1, n)
        # fibers of points that differ by lattice shifts recentre to the same r
        keys = np.round(flat * 1e11).astype(np.int64)
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        reps = flat[first]
        per = np.sum(np.abs(g.evaluate(reps[:, None, :] + offsets[None])) ** 2, axis=1)
        return per[inverse.ravel()].reshape(r.shape[:-1])

    def fn(pts):
        r, _ = recenter(pts)
        per = per_at(r)
        safe = np.where(per > tol, per, 1.0)
        return np.where(per > tol, g.evaluate(pts) / np.sqrt(safe), 0.0)

    # envelope: C / sqrt(min Per) estimated on a fine grid with a 1% margin
    probe = sample_grid(n, 4096 if n == 1 else 64)
    per_probe, _ = periodize(g, probe, W)
    live = per_probe[per_probe > tol]
    floor = max(float(live.min()) if live.size else 1.0, tol)
    env = replace(g.envelope, C=g.envelope.C / math.sqrt(0.99 * floor))
    return GeneratorSpectrum(f"qo({g.name})", n, fn, env, g.support_radius, g.hole_radius,
                             None, f"quasi-orthogonalized {g.name}")


def ambiguous_points(g: GeneratorSpectrum, xis, W: IndexWindow, tol: float) -> np.ndarray:
    """Grid points where tol <= Per <= 10 tol (rank decision is fragile)."""
    per, _ = periodize(g, xis, W)
    pts = as_points(xis, g.dimension)
    return pts[(per >= tol) & (per <= 10 * tol)]


def modulate(g: GeneratorSpectrum, a) -> GeneratorSpectrum:
    """Spectrum of M_a g: xi -> g^(xi - a)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (g.dimension,):
        raise ValueError("modulation vector dimension mismatch")
    amax = float(np.linalg.norm(a))
    if amax == 0.0:
        return g
    env = g.envelope
    env = Envelope(env.C * (1.0 + env.s * amax) ** env.p, env.p, env.s)

    def fn(pts):
        return g.fn(pts - a)

    support = None if g.support_radius is None else g.support_radius + amax
    label = ",".join(repr(float(v)) for v in a)
    return GeneratorSpectrum(f"mod[{label}]({g.name})", g.dimension, fn, env, support,
                             max(0.0, g.hole_radius - amax), None, g.note)


def compose(g: GeneratorSpectrum, B, name: str | None = None, scale: float = 1.0,
            phase: np.ndarray | None = None) -> GeneratorSpectrum:
    """xi -> scale * g^(B xi) * exp(-i <B xi, phase>)."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = g.dimension
    if B.shape != (n, n):
        raise ValueError("transform dimension mismatch")
    svals = np.linalg.svd(B, compute_uv=False)
    smin, smax = float(svals.min()), float(svals.max())
    env = g.envelope
    env = Envelope(abs(scale) * env.C, env.p, env.s * smin)
    support = None if g.support_radius is None else g.support_radius / smin
    small = None
    if g.small_scale is not None:
        c, q = g.small_scale
        small = (abs(scale) * c * smax ** q, q)
    BT = B.T.copy()
    ph = None if phase is None else np.asarray(phase, dtype=float)

    def fn(pts):
        y = pts @ BT
        val = scale * g.fn(y)
        if ph is not None:
            val = val * np.exp(-1j * (y @ ph))
        return val

    return GeneratorSpectrum(name or f"{g.name}@B", n, fn, env, support, g.hole_radius / smax, small, g.note)


def dilate_system(sys: GeneratorSystem, A: DilationMatrix) -> GeneratorSystem:
    """NTF generator of D_A V from one of V.

    For every generator phi and every l in a set of representatives of
    Z^n / A Z^n, D_A T_l phi has spectrum
    |det A|^(-1/2) phi^((A*)^-1 xi) exp(-i <(A*)^-1 xi, l>).
    """
    if A.dimension != sys.dimension:
        raise ValueError("dilation dimension mismatch")
    B = np.linalg.inv(A.star.array.astype(float))
    scale = abs(A.determinant) ** -0.5
    shifts = coset_representatives(A.transpose())
    gens = []
    for g in sys:
        for l in shifts:
            gens.append(compose(g, B, f"D{A.tolist()}T{list(l)}({g.name})", scale,
                                np.array(l, dtype=float) if any(l) else None))
    return GeneratorSystem(tuple(gens), sys.dimension, "unverified", f"D{A.tolist()}({sys.name})")


def tensor(*factors: GeneratorSpectrum, name: str | None = None) -> GeneratorSpectrum:
    """Product spectrum xi -> prod_i g_i^(xi_i) of one-dimensional factors."""
    if not factors or any(f.dimension != 1 for f in factors):
        raise ValueError("tensor factors must be one-dimensional spectra")
    n = len(factors)
    C = math.prod(f.envelope.C for f in factors)
    p = min(f.envelope.p for f in factors)
    s = min(f.envelope.s for f in factors) / math.sqrt(n)
    support = None
    if all(f.support_radius is not None for f in factors):
        support = math.sqrt(sum(f.support_radius ** 2 for f in factors))

    def fn(pts):
        out = np.ones(pts.shape[:-1], dtype=complex)
        for axis, f in enumerate(factors):
            out = out * f.fn(pts[..., axis:axis + 1])
        return out

    def tail(xis, K):
        # sum over the box complement = prod(full) - prod(windowed), per axis
        side = np.arange(-K, K + 1)
        inside = np.ones(xis.shape[0])
        full = np.ones(xis.shape[0])
        for axis, f in enumerate(factors):
            pts = xis[:, axis:axis + 1] + TWO_PI * side[None, :]
            w = np.sum(np.abs(f.evaluate(pts)) ** 2, axis=1)
            inside = inside * w
            full = full * (w + f.window_tail(xis[:, axis], K))
        return np.maximum(full - inside, 0.0)

    label = name or "x".join(f.name for f in factors)
    return GeneratorSpectrum(label, n, fn, Envelope(C, p, s), support, 0.0, None,
                             "tensor product", tail)


def perturb(g: GeneratorSpectrum, eps: float, seed: int) -> GeneratorSpectrum:
    """Multiply g^ by 1 + eps * sin(<omega, xi> + theta) with seeded omega, theta."""
    rng = np.random.default_rng(seed)
    omega = rng.uniform(1.0, 5.0, size=g.dimension)
    theta = rng.uniform(0.0, TWO_PI)
    env = replace(g.envelope, C=g.envelope.C * (1.0 + abs(eps)))

    def fn(pts):
        return g.fn(pts) * (1.0 + eps * np.sin(pts @ omega + theta))

    return GeneratorSpectrum(f"perturbed({g.name})", g.dimension, fn, env, g.support_radius,
                             g.hole_radius, None, g.note)


def zero_spectrum(n: int = 1) -> GeneratorSpectrum:
    return GeneratorSpectrum("zero", n, lambda pts: np.zeros(pts.shape[:-1], dtype=complex),
                             Envelope(0.0, 0.0), 0.0, 0.0, (0.0, 1.0), "identically zero")


# -- user piecewise spectra ----------------------------------------------------

def parse_piecewise(name: str, text: str) -> GeneratorSpectrum:
    """One-dimensional piecewise polynomial times exponential spectrum.

    One piece per nonblank line::

        a b | c0, c1, ... [| t]

    meaning g^(xi) = (c0 + c1 xi + ...) * exp(-i t xi) for a <= xi < b.
    Coefficients may be complex (Python syntax, e.g. ``1-2j``).
    """
    pieces = []
    for lineno, raw in enumerate(text.strip().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) not in (2, 3):
            raise ValueError(f"spectrum {name}: line {lineno}: expected 'a b | coeffs [| t]'")
        try:
            a, b = (float(v) for v in parts[0].split())
            coeffs = np.array([complex(c.replace(" ", "")) for c in parts[1].split(",") if c.strip()])
            t = float(parts[2]) if len(parts) == 3 else 0.0
        except ValueError as exc:
            raise ValueError(f"spectrum {name}: line {lineno}: {exc}") from None
        if not b > a:
            raise ValueError(f"spectrum {name}: line {lineno}: empty interval [{a}, {b})")
        if coeffs.size == 0:
            raise ValueError(f"spectrum {name}: line {lineno}: no coefficients")
        pieces.append((a, b, coeffs, t))
    if not pieces:
        raise ValueError(f"spectrum {name}: no pieces")
    pieces.sort(key=lambda pc: pc[0])
    for (a0, b0, _, _), (a1, _, _, _) in zip(pieces, pieces[1:]):
        if a1 < b0:
            raise ValueError(f"spectrum {name}: overlapping pieces at {a1}")

    def fn(pts):
        x = pts[..., 0]
        out = np.zeros(x.shape, dtype=complex)
        for a, b, coeffs, t in pieces:
            mask = (x >= a) & (x < b)
            val = np.polynomial.polynomial.polyval(x, coeffs)
            if t:
                val = val * np.exp(-1j * t * x)
            out = np.where(mask, val, out)
        return out

    R = max(max(abs(a), abs(b)) for a, b, _, _ in pieces)
    C = max(float(np.sum(np.abs(c) * max(abs(a), abs(b)) ** np.arange(c.size))) for a, b, c, _ in pieces)
    return GeneratorSpectrum(name, 1, fn, Envelope(C, 0.0), R, 0.0, None, "user piecewise spectrum")


def spectra_of(gens: Sequence[GeneratorSpectrum]) -> GeneratorSystem:
    return system(*gens)
