"""Finite models of the integer lattice Z^n.

Index windows, the shift operators lambda(k), sublattice membership for
integer dilation matrices, coset representatives of Z^n / A* Z^n and the
embedding operators D_d.  All congruence arithmetic is done with Python
integers, so it is exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class IndexWindow:
    """The box {k in Z^n : |k|_inf <= radius}, ordered lexicographically."""

    dimension: int
    radius: int
    indices: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    def position(self, k) -> int | None:
        """Row of ``k`` in ``indices``, or None when k lies outside the box."""
        k = tuple(int(c) for c in np.atleast_1d(k))
        if len(k) != self.dimension:
            raise ValueError(f"index {k} has dimension {len(k)}, window has {self.dimension}")
        if max(abs(c) for c in k) > self.radius:
            return None
        side = 2 * self.radius + 1
        pos = 0
        for c in k:
            pos = pos * side + (c + self.radius)
        return pos

    def positions(self, ks: np.ndarray) -> np.ndarray:
        """Vectorised ``position``; -1 marks indices outside the window."""
        ks = np.asarray(ks, dtype=np.int64).reshape(-1, self.dimension)
        side = 2 * self.radius + 1
        inside = np.all(np.abs(ks) <= self.radius, axis=1)
        shifted = ks + self.radius
        pos = np.zeros(ks.shape[0], dtype=np.int64)
        for axis in range(self.dimension):
            pos = pos * side + shifted[:, axis]
        return np.where(inside, pos, -1)

    def zero_position(self) -> int:
        return self.position((0,) * self.dimension)

    def delta(self, k) -> np.ndarray:
        pos = self.position(k)
        if pos is None:
            raise ValueError(f"delta index {tuple(np.atleast_1d(k))} outside window of radius {self.radius}")
        out = np.zeros(self.size, dtype=complex)
        out[pos] = 1.0
        return out


def window(n: int, K: int) -> IndexWindow:
    if n < 1:
        raise ValueError("window dimension must be >= 1")
    if K < 1:
        raise ValueError("window radius must be >= 1")
    axis = range(-K, K + 1)
    indices = np.array(list(itertools.product(axis, repeat=n)), dtype=np.int64)
    return IndexWindow(n, K, indices)


def _det(rows: list[list[int]]) -> int:
    # Bareiss fraction-free elimination: exact over the integers.
    m = [list(r) for r in rows]
    n = len(m)
    sign, prev = 1, 1
    for i in range(n - 1):
        if m[i][i] == 0:
            swap = next((r for r in range(i + 1, n) if m[r][i] != 0), None)
            if swap is None:
                return 0
            m[i], m[swap] = m[swap], m[i]
            sign = -sign
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                m[r][c] = (m[r][c] * m[i][i] - m[r][i] * m[i][c]) // prev
        prev = m[i][i]
    return sign * m[n - 1][n - 1]


def _adjugate(rows: list[list[int]]) -> list[list[int]]:
    n = len(rows)
    if n == 1:
        return [[1]]
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for r, row in enumerate(rows) if r != i]
            adj[j][i] = (-1) ** (i + j) * _det(minor)
    return adj


@dataclass(frozen=True)
class DilationMatrix:
    """Integer n x n matrix with nonzero determinant.

    ``expansive`` records whether every eigenvalue has modulus > 1; it is
    required by the wavelet layer but not by the lattice operations.
    """

    entries: tuple[tuple[int, ...], ...]
    determinant: int = field(init=False)
    expansive: bool = field(init=False)

    def __post_init__(self):
        rows = [[int(v) for v in row] for row in self.entries]
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("dilation matrix must be square and nonempty")
        for row, orig in zip(rows, self.entries):
            if any(float(v) != float(o) for v, o in zip(row, orig)):
                raise ValueError("dilation matrix entries must be integers")
        det = _det(rows)
        if det == 0:
            raise ValueError("dilation matrix is singular")
        object.__setattr__(self, "entries", tuple(tuple(r) for r in rows))
        object.__setattr__(self, "determinant", det)
        eig = np.linalg.eigvals(np.array(rows, dtype=float))
        object.__setattr__(self, "expansive", bool(np.all(np.abs(eig) > 1.0)))

    @classmethod
    def from_array(cls, a) -> "DilationMatrix":
        a = np.atleast_2d(np.asarray(a))
        return cls(tuple(tuple(int(v) for v in row) for row in a))

    @property
    def dimension(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def transpose(self) -> "DilationMatrix":
        return DilationMatrix(tuple(zip(*self.entries)))

    @property
    def star(self) -> "DilationMatrix":
        """A* (the transpose, for real matrices)."""
        return self.transpose()

    def adjugate(self) -> list[list[int]]:
        return _adjugate([list(r) for r in self.entries])

    def tolist(self) -> list[list[int]]:
        return [list(r) for r in self.entries]


def dilation(a) -> DilationMatrix:
    """Build a DilationMatrix from an int, a nested list or an array."""
    if isinstance(a, DilationMatrix):
        return a
    if np.isscalar(a):
        return DilationMatrix(((int(a),),))
    return DilationMatrix.from_array(a)


QUINCUNX = DilationMatrix(((1, 1), (1, -1)))


def in_sublattice(k, A: DilationMatrix) -> bool:
    """True iff k lies in A* Z^n.

    A* x = k has an integer solution iff adj(A*) k is divisible by det(A*)
    componentwise, since x = adj(A*) k / det(A*).
    """
    k = [int(c) for c in np.atleast_1d(k)]
    if len(k) != A.dimension:
        raise ValueError(f"vector of dimension {len(k)} vs matrix of dimension {A.dimension}")
    star = A.star
    adj = star.adjugate()
    det = star.determinant
    return all(sum(a * c for a, c in zip(row, k)) % det == 0 for row in adj)


@dataclass(frozen=True)
class CosetSet:
    matrix: DilationMatrix
    representatives: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.representatives)

    def __iter__(self):
        return iter(self.representatives)


def _box_scan(n: int, side: int):
    # first coordinate varies fastest
    for tup in itertools.product(range(side), repeat=n):
        yield tuple(reversed(tup))


def coset_representatives(A: DilationMatrix) -> CosetSet:
    """Complete set of representatives of Z^n / A* Z^n.

    Scans the box [0, |det A|)^n (first coordinate fastest) and keeps the
    first member of every class.  |det A| annihilates the quotient group, so
    every class meets the box.
    """
    m = abs(A.determinant)
    reps: list[tuple[int, ...]] = []
    for cand in _box_scan(A.dimension, m):
        if not any(in_sublattice([c - r for c, r in zip(cand, rep)], A) for rep in reps):
            reps.append(cand)
            if len(reps) == m:
                break
    if len(reps) != m:
        raise RuntimeError(f"coset scan found {len(reps)} classes, expected {m}")
    return CosetSet(A, tuple(reps))


@dataclass(frozen=True)
class TruncatedOperator:
    """0/1 matrix of a lattice operator cut down to a window.

    ``dropped`` counts window coordinates whose image leaves the window.
    """

    matrix: np.ndarray
    dropped: int
    dropped_positions: np.ndarray = field(repr=False)


def shift_operator(k, W: IndexWindow) -> TruncatedOperator:
    """lambda(k): (lambda(k) a)(l) = a(l - k), truncated to W."""
    k = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if k.shape != (W.dimension,):
        raise ValueError("shift vector dimension does not match window")
    targets = W.positions(W.indices + k)
    mat = np.zeros((W.size, W.size))
    src = np.nonzero(targets >= 0)[0]
    mat[targets[src], src] = 1.0
    lost = np.nonzero(targets < 0)[0]
    return TruncatedOperator(mat, int(lost.size), lost)


def embed_operator(d, A: DilationMatrix, W: IndexWindow) -> TruncatedOperator:
    """D_d: (D_d a)(k) = a(l) if k = d + A* l, else 0, truncated to W."""
    d = np.atleast_1d(np.asarray(d, dtype=np.int64))
    if d.shape != (W.dimension,) or A.dimension != W.dimension:
        raise ValueError("dimension mismatch between d, A and window")
    star = A.star.array
    images = W.indices @ star.T + d
    targets = W.positions(images)
    mat = np.zeros((W.size, W.size))
    src = np.nonzero(targets >= 0)[0]
    mat[targets[src], src] = 1.0
    lost = np.nonzero(targets < 0)[0]
    return TruncatedOperator(mat, int(lost.size), lost)
