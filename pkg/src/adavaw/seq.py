"""Sequences, discrete difference operators, variational functionals and losses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DimensionError

__all__ = [
    "Loss",
    "TimeSeries",
    "VariationalProfile",
    "diff_op",
    "loss_eval",
    "tv_k",
    "variational_profile",
]


@dataclass(frozen=True)
class TimeSeries:
    """Ground truth and/or noisy observations over a horizon ``n``.

    Time is 1-based at the API level: ``window(s, e)`` returns entries
    ``s..e`` inclusive.
    """

    n: int
    theta: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"horizon must be positive, got {self.n}")
        if self.theta is None and self.y is None:
            raise DimensionError("a TimeSeries needs theta, y or both")
        for name in ("theta", "y"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=float)
            if v.ndim != 1 or v.size != self.n:
                raise DimensionError(f"{name} has shape {v.shape}, expected ({self.n},)")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def from_theta(cls, theta) -> "TimeSeries":
        theta = np.asarray(theta, dtype=float)
        return cls(n=theta.size, theta=theta)

    @classmethod
    def from_y(cls, y, theta=None) -> "TimeSeries":
        y = np.asarray(y, dtype=float)
        return cls(n=y.size, theta=theta, y=y)

    def window(self, s: int, e: int, which: str = "y") -> np.ndarray:
        v = getattr(self, which)
        if v is None:
            raise DimensionError(f"series has no {which}")
        if not 1 <= s <= e <= self.n:
            raise DimensionError(f"window [{s}, {e}] outside 1..{self.n}")
        return v[s - 1 : e]


@dataclass(frozen=True)
class VariationalProfile:
    k: int
    tv_k: float
    sobolev: float
    holder: float
    jumps: int


def diff_op(x, order: int) -> np.ndarray:
    """Apply the first difference ``order`` times."""
    x = np.asarray(x, dtype=float)
    if order < 1:
        raise ConfigurationError(f"order must be positive, got {order}")
    if x.ndim != 1 or x.size <= order:
        raise DimensionError(f"need length > {order}, got {x.size}")
    return np.diff(x, n=order)


def tv_k(theta, k: int) -> float:
    """``n**k * ||D^{k+1} theta||_1``."""
    theta = np.asarray(theta, dtype=float)
    if k < 0:
        raise ConfigurationError(f"k must be nonnegative, got {k}")
    n = theta.size
    if n < k + 2:
        raise DimensionError(f"need n >= k+2 = {k + 2}, got {n}")
    return float(n**k * np.abs(diff_op(theta, k + 1)).sum())


def variational_profile(theta, k: int) -> VariationalProfile:
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    if k < 0:
        raise ConfigurationError(f"k must be nonnegative, got {k}")
    if n < k + 2:
        raise DimensionError(f"need n >= k+2 = {k + 2}, got {n}")
    d = diff_op(theta, k + 1)
    scale = float(n) ** k
    eps0 = 1e-10 * max(1.0, float(np.max(np.abs(theta))))
    return VariationalProfile(
        k=k,
        tv_k=float(scale * np.abs(d).sum()),
        sobolev=float(scale * np.linalg.norm(d)),
        holder=float(scale * np.max(np.abs(d))),
        jumps=int(np.count_nonzero(np.abs(d) > eps0)),
    )


@dataclass(frozen=True)
class Loss:
    """Loss family descriptor.  ``param`` is omega for huber, epsilon for eps_logistic."""

    kind: str = "squared"
    param: float = 1.0

    # smoothness constant of the derivative
    @property
    def gamma(self) -> float:
        return {"squared": 2.0, "huber": 1.0, "logcosh": 1.0, "eps_logistic": 0.5}[self.kind]

    def __call__(self, x, theta):
        return loss_eval(self, x, theta)


def _log1pexp(z):
    return np.logaddexp(0.0, z)


def loss_eval(kind, x, theta_t):
    """Evaluate a loss; ``kind`` is a :class:`Loss` or a bare name.

    Works elementwise on arrays as well as on scalars.
    """
    if isinstance(kind, str):
        kind = Loss(kind)
    r = np.asarray(x, dtype=float) - np.asarray(theta_t, dtype=float)
    if kind.kind == "squared":
        out = r * r
    elif kind.kind == "huber":
        w = kind.param
        if not w > 0:
            raise ConfigurationError(f"huber omega must be positive, got {w}")
        a = np.abs(r)
        out = np.where(a <= w, 0.5 * r * r, w * (a - 0.5 * w))
    elif kind.kind == "logcosh":
        a = np.abs(r)
        # log cosh(a) = a + log1p(exp(-2a)) - log 2, stable for large a
        out = a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)
    elif kind.kind == "eps_logistic":
        e = kind.param
        if not e >= 0:
            raise ConfigurationError(f"epsilon must be nonnegative, got {e}")
        out = _log1pexp(r - e) + _log1pexp(-r - e) - 2.0 * _log1pexp(-e)
    else:
        raise ConfigurationError(f"unknown loss kind {kind.kind!r}")
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out
