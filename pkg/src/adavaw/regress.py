"""Incremental monomial least squares.

Contains the Vovk-Azoury-Warmuth (VAW) forecaster used inside every bin of
the online policy, the polynomial ``recenter`` residual and exact
determinants of monomial design matrices.

Raw monomial features ``[1, t, ..., t^k]`` make ``I + sum x x^T`` badly
conditioned once ``t`` reaches the thousands (its entries span ``t^{2k+1}``
orders of magnitude).  :class:`VawState` therefore stores the inverse in
rescaled coordinates ``P = S A^{-1} S`` with ``S = diag(T^j)`` and ``T`` the
largest time index absorbed so far.  ``P`` is well scaled, rank-one updates
act on ``S^{-1} x`` whose entries are at most one, and the raw inverse is
recovered on demand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError
from .wavelet import orthonormal_polynomials

__all__ = [
    "MonomialFeature",
    "VawState",
    "design_determinant",
    "design_log_determinant",
    "design_determinant_factor",
    "hilbert_determinant",
    "monomial_feature",
    "recenter",
    "vaw_absorb_feature",
    "vaw_absorb_label",
    "vaw_predict",
    "vaw_regret_bound",
]

REFRESH_EVERY = 256


@dataclass(frozen=True)
class MonomialFeature:
    t_rel: int
    k: int

    def __post_init__(self):
        if self.t_rel < 1:
            raise DimensionError(f"t_rel must be a positive integer, got {self.t_rel}")
        if self.k < 0:
            raise ConfigurationError(f"k must be nonnegative, got {self.k}")

    @property
    def vector(self) -> np.ndarray:
        return float(self.t_rel) ** np.arange(self.k + 1)


def monomial_feature(t_rel: int, k: int) -> np.ndarray:
    """``[1, t_rel, ..., t_rel**k]`` as floats."""
    return MonomialFeature(t_rel, k).vector


def _as_vector(x, dim: int) -> np.ndarray:
    if isinstance(x, MonomialFeature):
        x = x.vector
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise DimensionError(f"feature has shape {x.shape}, expected ({dim},)")
    return x


@dataclass
class VawState:
    """Running quantities of a VAW forecaster with ``k + 1`` monomial features.

    ``gram`` holds ``sum x x^T`` (without the identity), ``b`` holds
    ``sum y x``, ``count`` the number of absorbed labels.
    """

    k: int
    gram: np.ndarray = field(default=None)
    b: np.ndarray = field(default=None)
    count: int = 0
    scale: float = 1.0
    _p: np.ndarray = field(default=None, repr=False)
    _updates: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.k < 0:
            raise ConfigurationError(f"k must be nonnegative, got {self.k}")
        d = self.k + 1
        self._powers = np.arange(d, dtype=float)
        if self.gram is None:
            self.gram = np.zeros((d, d))
        if self.b is None:
            self.b = np.zeros(d)
        if self._p is None:
            self._refresh()

    @property
    def dim(self) -> int:
        return self.k + 1

    def copy(self) -> "VawState":
        out = VawState(
            k=self.k,
            gram=self.gram.copy(),
            b=self.b.copy(),
            count=self.count,
            scale=self.scale,
            _p=self._p.copy(),
            _updates=self._updates,
        )
        return out

    def _svec(self) -> np.ndarray:
        return self.scale**self._powers

    def _refresh(self) -> None:
        s = self._svec()
        m = self.gram / np.outer(s, s)
        m[np.diag_indices_from(m)] += 1.0 / (s * s)
        p = np.linalg.inv(m)
        self._p = 0.5 * (p + p.T)
        self._updates = 0

    def _rescale(self, new_scale: float) -> None:
        d = (new_scale / self.scale) ** self._powers
        self._p *= np.outer(d, d)
        self.scale = new_scale

    @property
    def A_inv(self) -> np.ndarray:
        """``(I + sum x x^T)^{-1}`` in raw coordinates."""
        s = self._svec()
        return self._p / np.outer(s, s)

    def absorb_feature(self, x) -> "VawState":
        x = _as_vector(x, self.dim)
        if not np.any(x):
            return self
        if self.k > 0:
            need = float(np.max(np.abs(x[1:]) ** (1.0 / self._powers[1:])))
            if need > self.scale:
                self._rescale(need)
        self.gram += np.outer(x, x)
        z = x / self._svec()
        pz = self._p @ z
        self._p -= np.outer(pz, pz) / (1.0 + z @ pz)
        self._updates += 1
        if self._updates >= REFRESH_EVERY:
            self._refresh()
        return self

    def absorb_label(self, x, y: float) -> "VawState":
        x = _as_vector(x, self.dim)
        self.b += y * x
        self.count += 1
        return self

    def predict(self, x) -> float:
        x = _as_vector(x, self.dim)
        s = self._svec()
        return float((x / s) @ self._p @ (self.b / s))


def vaw_predict(state: VawState, x_t) -> float:
    return state.predict(x_t)


def vaw_absorb_feature(state: VawState, x_t) -> VawState:
    return state.absorb_feature(x_t)


def vaw_absorb_label(state: VawState, x_t, y_t: float) -> VawState:
    return state.absorb_label(x_t, y_t)


def vaw_regret_bound(u, k: int, n: int, y_bound: float, x_bound: float) -> float:
    """``0.5 ||u||^2 + (d Y^2 / 2) log(1 + n X^2 / d)`` with ``d = k + 1``."""
    d = k + 1
    u = np.asarray(u, dtype=float)
    return float(0.5 * u @ u + 0.5 * d * y_bound**2 * math.log1p(n * x_bound**2 / d))


def recenter(y_window, k: int) -> np.ndarray:
    """Residual of the least-squares degree-``k`` polynomial fit over the window.

    The fit uses an orthonormal basis of the monomial columns, so no normal
    equations are formed.
    """
    y = np.asarray(y_window, dtype=float)
    if k < 0:
        raise ConfigurationError(f"k must be nonnegative, got {k}")
    if y.ndim != 1 or y.size < k + 1:
        raise DimensionError(f"window of length {y.size} shorter than k+1 = {k + 1}")
    q = orthonormal_polynomials(y.size, k + 1)
    return y - q @ (q.T @ y)


# --- determinants of monomial design matrices --------------------------------

MAX_DET_ORDER = 5
MAX_DET_TIME = 200


def _check_det_args(t: int, m: int) -> None:
    if t < 1 or m < 1:
        raise DimensionError(f"t and m must be positive, got t={t}, m={m}")
    if m > MAX_DET_ORDER or t > MAX_DET_TIME:
        raise ConfigurationError(
            f"determinant guard: need m <= {MAX_DET_ORDER} and t <= {MAX_DET_TIME}"
        )


def _exact_design_determinant(t: int, m: int) -> int:
    # Bareiss fraction-free elimination on the integer moment matrix
    sums = [sum(i**p for i in range(1, t + 1)) for p in range(2 * m - 1)]
    a = [[sums[i + j] for j in range(m)] for i in range(m)]
    sign, prev = 1, 1
    for c in range(m - 1):
        if a[c][c] == 0:
            swap = next((r for r in range(c + 1, m) if a[r][c] != 0), None)
            if swap is None:
                return 0
            a[c], a[swap] = a[swap], a[c]
            sign = -sign
        for i in range(c + 1, m):
            for j in range(c + 1, m):
                a[i][j] = (a[i][j] * a[c][c] - a[i][c] * a[c][j]) // prev
        prev = a[c][c]
    return sign * a[m - 1][m - 1]


def design_determinant(t: int, m: int) -> float:
    """``det(X^T X)`` for rows ``[1, i, ..., i^{m-1}]``, ``i = 1..t``, computed exactly."""
    _check_det_args(t, m)
    return float(_exact_design_determinant(t, m))


def design_log_determinant(t: int, m: int) -> float:
    """Natural log of :func:`design_determinant`; ``-inf`` when it vanishes."""
    _check_det_args(t, m)
    det = _exact_design_determinant(t, m)
    return math.log(det) if det > 0 else -math.inf


def design_determinant_factor(t: int, m: int) -> int:
    """``t^m * prod_{i=2..m} (t^2 - (i-1)^2)^{m-i+1}``, the polynomial part of the determinant."""
    out = t**m
    for i in range(2, m + 1):
        out *= (t * t - (i - 1) ** 2) ** (m - i + 1)
    return out


def hilbert_determinant(m: int) -> float:
    """Determinant of the ``m x m`` Hilbert matrix, via its closed form."""
    num = 1
    for i in range(1, m):
        num *= math.factorial(i)
    num = num**4
    den = 1
    for i in range(1, 2 * m):
        den *= math.factorial(i)
    return num / den
