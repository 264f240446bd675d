"""Orthonormal dyadic wavelet transform with polynomial vanishing moments.

The basis is a discrete multiresolution on ``1..N``: at every dyadic scale
the signal on a block is split into its projection on discrete polynomials
of degree ``< p`` (the scaling part) and the orthogonal complement inside
the block (the detail part).  Pairs of neighbouring blocks are merged by a
single ``2p x 2p`` orthogonal matrix, so a transform costs ``O(N p)``.

``p`` is the coarse count ``2**ceil(log2(k+1))``.  Detail rows are therefore
orthogonal to every polynomial of degree ``<= k`` and supported on one
dyadic block.  With ``k = 0`` the construction is exactly the Haar system.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError

__all__ = [
    "DwtBasis",
    "build_basis",
    "coarse_count",
    "estimate_sigma_mad",
    "forward",
    "inverse",
    "orthonormal_polynomials",
    "pack",
    "soft_threshold",
    "universal_threshold",
]

MAD_SCALE = 0.6745


def coarse_count(k: int) -> int:
    """Number of scaling rows for TV order ``k``: ``2**ceil(log2(k+1))``."""
    if k < 0:
        raise ConfigurationError(f"k must be nonnegative, got {k}")
    return 1 << max(0, math.ceil(math.log2(k + 1)))


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def orthonormal_polynomials(m: int, num: int) -> np.ndarray:
    """Columns are orthonormal discrete polynomials of degree ``0..num-1`` on ``1..m``.

    Uses the three-term recurrence of the discrete Chebyshev (Gram)
    polynomials on an equispaced grid, then normalises.  Each column is
    signed so that its value at the first grid point is positive.
    """
    if num < 1 or num > m:
        raise DimensionError(f"need 1 <= num <= m, got num={num}, m={m}")
    u = np.arange(m, dtype=float) - 0.5 * (m - 1)
    basis = np.empty((num, m))
    prev, cur = np.zeros(m), np.ones(m)
    for j in range(num):
        basis[j] = cur
        nxt = u * cur
        if j > 0:
            nxt -= (j * j * (m * m - j * j) / (4.0 * (4 * j * j - 1))) * prev
        prev, cur = cur, nxt
    basis /= np.sqrt(np.einsum("ij,ij->i", basis, basis))[:, None]
    basis[1::2] *= -1.0
    return basis.T


@functools.lru_cache(maxsize=256)
def _dyadic_polynomials(m: int, num: int) -> np.ndarray:
    basis = orthonormal_polynomials(m, num)
    basis.setflags(write=False)
    return basis


def _first_sign(row: np.ndarray) -> float:
    scale = np.max(np.abs(row))
    idx = np.flatnonzero(np.abs(row) > 1e-12 * scale)
    return 1.0 if idx.size == 0 or row[idx[0]] > 0 else -1.0


@functools.lru_cache(maxsize=4096)
def _merge_matrix(m: int, p: int) -> np.ndarray:
    """Orthogonal ``2p x 2p`` map from two child blocks of size m to the parent.

    Columns ``:p`` express the parent's orthonormal polynomials in the
    children's coordinates; columns ``p:`` complete them to an orthonormal
    basis and are the detail templates of this scale.
    """
    child = _dyadic_polynomials(m, p)
    parent = _dyadic_polynomials(2 * m, p)
    coords = np.vstack([child.T @ parent[:m], child.T @ parent[m:]])
    q, _ = np.linalg.qr(np.hstack([coords, np.eye(2 * p)]))
    q = q[:, : 2 * p].copy()
    for j in range(p):
        if np.dot(q[:, j], coords[:, j]) < 0:
            q[:, j] = -q[:, j]
    for j in range(p, 2 * p):
        row = np.concatenate([child @ q[:p, j], child @ q[p:, j]])
        q[:, j] *= _first_sign(row)
    q.setflags(write=False)
    return q


def _forward_rows(x: np.ndarray, p: int) -> np.ndarray:
    """Transform each row of ``x`` (shape ``(b, N)``)."""
    b, n = x.shape
    c = x.reshape(b, n // p, p) @ _dyadic_polynomials(p, p)
    details = []
    m = p
    while m < n:
        out = c.reshape(b, -1, 2 * p) @ _merge_matrix(m, p)
        c = out[:, :, :p]
        details.append(out[:, :, p:].reshape(b, -1))
        m *= 2
    return np.concatenate([c.reshape(b, p)] + details[::-1], axis=1)


def _inverse_rows(a: np.ndarray, p: int) -> np.ndarray:
    b, n = a.shape
    c = a[:, :p].reshape(b, 1, p)
    pos = p
    m = n // 2
    while m >= p:
        nblocks = c.shape[1]
        d = a[:, pos : pos + nblocks * p].reshape(b, nblocks, p)
        pos += nblocks * p
        merged = np.concatenate([c, d], axis=2) @ _merge_matrix(m, p).T
        c = merged.reshape(b, 2 * nblocks, p)
        m //= 2
    return (c @ _dyadic_polynomials(p, p).T).reshape(b, n)


@dataclass(frozen=True)
class DwtBasis:
    """Orthonormal DWT on a dyadic length with ``k + 1`` vanishing moments.

    Rows are ordered coarse block first, then detail levels from coarsest to
    finest, blocks left to right within a level.  The dense matrix is only
    materialised on demand through :attr:`rows`.
    """

    length: int
    k: int
    coarse_count: int
    _rows: list = field(default_factory=list, repr=False, compare=False)

    @property
    def num_levels(self) -> int:
        return int(math.log2(self.length // self.coarse_count))

    @property
    def level_of_row(self) -> np.ndarray:
        """Detail level per row (0 = coarsest detail); coarse rows carry -1."""
        p = self.coarse_count
        levels = [np.full(p, -1)]
        for j in range(self.num_levels):
            levels.append(np.full(p << j, j))
        return np.concatenate(levels)

    @property
    def rows(self) -> np.ndarray:
        if not self._rows:
            mat = _forward_rows(np.eye(self.length), self.coarse_count).T
            mat.setflags(write=False)
            self._rows.append(mat)
        return self._rows[0]

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.length:
            raise DimensionError(
                f"signal length {x.shape[-1]} does not match basis length {self.length}"
            )
        flat = x.reshape(-1, self.length)
        return _forward_rows(flat, self.coarse_count).reshape(x.shape)

    def inverse(self, coeffs) -> np.ndarray:
        a = np.asarray(coeffs, dtype=float)
        if a.shape[-1] != self.length:
            raise DimensionError(
                f"coefficient length {a.shape[-1]} does not match basis length {self.length}"
            )
        flat = a.reshape(-1, self.length)
        return _inverse_rows(flat, self.coarse_count).reshape(a.shape)

    def to_csv(self, path) -> None:
        """Write the dense matrix row-major with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in self.rows:
                writer.writerow([f"{v:.17g}" for v in row])


@functools.lru_cache(maxsize=None)
def build_basis(length: int, k: int) -> DwtBasis:
    """Return the (cached, immutable) basis for ``length`` and TV order ``k``."""
    if not _is_power_of_two(length):
        raise DimensionError(f"basis length must be a power of two, got {length}")
    p = coarse_count(k)
    if length < 2 * p:
        raise DimensionError(f"length {length} < 2 * coarse_count ({2 * p}) for k={k}")
    return DwtBasis(length=length, k=k, coarse_count=p)


def forward(basis: DwtBasis, x) -> np.ndarray:
    return basis.forward(x)


def inverse(basis: DwtBasis, coeffs) -> np.ndarray:
    return basis.inverse(coeffs)


def soft_threshold(c, lam: float) -> np.ndarray:
    """Shrink every coordinate toward zero by ``lam``; zero inside ``[-lam, lam]``."""
    if lam < 0:
        raise ConfigurationError(f"threshold must be nonnegative, got {lam}")
    c = np.asarray(c, dtype=float)
    return np.sign(c) * np.maximum(np.abs(c) - lam, 0.0)


def universal_threshold(sigma: float, length: int, beta: float = 2.0) -> float:
    """``sigma * sqrt(beta * log(length))``; ``beta = 2`` is the classical choice."""
    return sigma * math.sqrt(beta * math.log(length)) if length > 1 else 0.0


def pack(u):
    """Cover ``u`` by two dyadic segments: its first and last ``2**floor(log2 L)`` entries."""
    u = np.asarray(u)
    n = u.shape[0]
    if n < 2:
        raise DimensionError(f"pack needs at least 2 entries, got {n}")
    size = 1 << (n.bit_length() - 1)
    return u[:size], u[n - size :]


def estimate_sigma_mad(y, k: int = 0) -> float:
    """Median absolute finest-scale detail coefficient divided by 0.6745.

    Uses the longest dyadic prefix of ``y``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise DimensionError("need a 1-D vector with at least 2 entries")
    size = 1 << (y.size.bit_length() - 1)
    if size < 2 * coarse_count(k):
        raise DimensionError(
            f"vector of length {y.size} too short for k={k} (need {2 * coarse_count(k)})"
        )
    coeffs = build_basis(size, k).forward(y[:size])
    finest = coeffs[size // 2 :]
    return float(np.median(np.abs(finest)) / MAD_SCALE)
