"""Built-in generator systems with exact closed-form spectra.

Names accepted by ``catalog_get``::

    shannon-scaling  shannon-wavelet  haar-scaling  haar-wavelet
    meyer-scaling    meyer-wavelet    bspline:M (or bspline(M))
    tensor:a*b[*c...] (product of one-dimensional entries)   zero[:n]
"""

from __future__ import annotations

import math
import re

import numpy as np

from .spectra import Envelope, GeneratorSpectrum, GeneratorSystem, tensor, zero_spectrum

PI = math.pi

# sup_x |sin(x/2)/(x/2)| (1+x) = 2.67519...; sup_x 4 sin^2(x/4)/x (1+x) = 4.64598...
_SINC_ENV = 2.676
_HAAR_WAVELET_ENV = 4.65


def sinc(x) -> np.ndarray:
    """sin(x)/x with the series 1 - x^2/6 + x^4/120 below |x| < 1e-4."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def _box(pts):
    x = pts[..., 0]
    return np.exp(-0.5j * x) * sinc(0.5 * x)


def _haar_wavelet(pts):
    # (1 - e^{-i x/2})^2 / (i x) = i e^{-i x/2} (x/4) sinc(x/4)^2
    x = pts[..., 0]
    return 1j * np.exp(-0.5j * x) * (0.25 * x) * sinc(0.25 * x) ** 2


def _shannon_scaling(pts):
    x = pts[..., 0]
    return ((x >= -PI) & (x < PI)).astype(complex)


def _shannon_wavelet(pts):
    x = pts[..., 0]
    return (((x >= -2 * PI) & (x < -PI)) | ((x >= PI) & (x < 2 * PI))).astype(complex)


def meyer_ramp(x) -> np.ndarray:
    """C^3 ramp x^4 (35 - 84x + 70x^2 - 20x^3), clipped to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x ** 4 * (35.0 - 84.0 * x + 70.0 * x ** 2 - 20.0 * x ** 3)


def _meyer_phi(x):
    a = np.abs(x)
    mid = np.cos(0.5 * PI * meyer_ramp(3.0 * a / (2 * PI) - 1.0))
    return np.where(a <= 2 * PI / 3, 1.0, np.where(a <= 4 * PI / 3, mid, 0.0))


def _meyer_scaling(pts):
    return _meyer_phi(pts[..., 0]).astype(complex)


def _meyer_wavelet(pts):
    x = pts[..., 0]
    return np.exp(0.5j * x) * (_meyer_phi(x + 2 * PI) + _meyer_phi(x - 2 * PI)) * _meyer_phi(0.5 * x)


def _spec(name, fn, env, support=None, hole=0.0, small=None, note=""):
    return GeneratorSpectrum(name, 1, fn, env, support, hole, small, note)


def bspline(m: int) -> GeneratorSpectrum:
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"bspline order must be a positive integer, got {m!r}")
    m = int(m)

    def fn(pts):
        return _box(pts) ** m

    return _spec(f"bspline:{m}", fn, Envelope(_SINC_ENV ** m, float(m)),
                 note=f"cardinal B-spline of order {m} supported on [0, {m}]")


_BASE = {
    "shannon-scaling": lambda: _spec("shannon-scaling", _shannon_scaling, Envelope(1.0, 0.0), PI,
                                     note="indicator of [-pi, pi)"),
    "shannon-wavelet": lambda: _spec("shannon-wavelet", _shannon_wavelet, Envelope(1.0, 0.0), 2 * PI, PI,
                                     note="indicator of [-2pi, -pi) U [pi, 2pi)"),
    "haar-scaling": lambda: _spec("haar-scaling", _box, Envelope(_SINC_ENV, 1.0),
                                  note="box function on [0, 1)"),
    "haar-wavelet": lambda: _spec("haar-wavelet", _haar_wavelet, Envelope(_HAAR_WAVELET_ENV, 1.0),
                                  small=(0.25, 1.0), note="Haar wavelet, |psi^(xi)| <= |xi|/4 near 0"),
    "meyer-scaling": lambda: _spec("meyer-scaling", _meyer_scaling, Envelope(1.0, 0.0), 4 * PI / 3,
                                   note="Meyer scaling function, C^3 ramp"),
    "meyer-wavelet": lambda: _spec("meyer-wavelet", _meyer_wavelet, Envelope(1.0, 0.0), 8 * PI / 3,
                                   2 * PI / 3, note="Meyer wavelet, C^3 ramp"),
}

_ROLES = {
    "shannon-scaling": "ntf-generator",
    "shannon-wavelet": "ntf-generator",
    "haar-scaling": "ntf-generator",
    "haar-wavelet": "ntf-generator",
    "meyer-scaling": "ntf-generator",
    "meyer-wavelet": "ntf-generator",
}

# wavelet -> scaling function of its MRA
MRA_PAIRS = {
    "shannon-wavelet": "shannon-scaling",
    "haar-wavelet": "haar-scaling",
    "meyer-wavelet": "meyer-scaling",
}


def spectrum(name: str) -> GeneratorSpectrum:
    """A single one-generator catalog spectrum (1D names, bspline, tensor)."""
    return catalog_get(name).generators[0]


def catalog_get(name: str, params: dict | None = None) -> GeneratorSystem:
    params = dict(params or {})
    key = name.strip().lower()
    m = re.fullmatch(r"bspline(?::|\()\s*(-?\d+)\s*\)?", key)
    if key == "bspline":
        if "order" not in params:
            raise ValueError("bspline needs an order, e.g. bspline:2")
        m = re.fullmatch(r"(-?\d+)", str(params["order"]).strip())
        if m is None:
            raise ValueError(f"invalid bspline order {params['order']!r}")
    if m is not None:
        order = int(m.group(1))
        return GeneratorSystem((bspline(order),), 1, "unverified" if order > 1 else "ntf-generator", key)
    if key in _BASE:
        return GeneratorSystem((_BASE[key](),), 1, _ROLES[key], key)
    if key.startswith("tensor:") or key.startswith("tensor("):
        inner = key[len("tensor:"):] if key.startswith("tensor:") else key[len("tensor("):].rstrip(")")
        parts = [p for p in re.split(r"[*,]", inner) if p.strip()]
        if len(parts) < 2:
            raise ValueError(f"tensor needs at least two factors: {name!r}")
        factors = []
        for p in parts:
            sub = catalog_get(p.strip())
            if sub.dimension != 1 or len(sub) != 1:
                raise ValueError(f"tensor factor {p!r} is not a one-dimensional single generator")
            factors.append(sub.generators[0])
        g = tensor(*factors, name=f"tensor:{'*'.join(f.name for f in factors)}")
        return GeneratorSystem((g,), len(factors), "unverified", g.name)
    zm = re.fullmatch(r"zero(?::(\d+))?", key)
    if zm is not None:
        n = int(zm.group(1) or params.get("dimension", 1))
        if n < 1:
            raise ValueError("zero system dimension must be positive")
        return GeneratorSystem((zero_spectrum(n),), n, "unverified", key)
    raise ValueError(f"unknown catalog system {name!r}; see `sitrace catalog`")


def listing() -> list[tuple[str, int, str]]:
    """(name, dimension, description) for every catalog entry."""
    rows = [(name, 1, make().note) for name, make in _BASE.items()]
    rows.append(("bspline:M", 1, "cardinal B-spline of order M >= 1"))
    rows.append(("tensor:a*b", 0, "separable product of one-dimensional entries"))
    rows.append(("zero[:n]", 0, "identically zero spectrum"))
    return rows
