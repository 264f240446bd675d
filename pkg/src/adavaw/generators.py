"""Synthetic ground-truth sequences and observation noise.

Every generator is a pure function of its spec.  Shape parameters (knot
positions, amplitudes) are drawn from the spec's seed alone and knot
positions are fractions of the horizon, so the same seed at different
horizons samples the same underlying function.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigurationError, GenerationError
from .regress import recenter
from .seq import TimeSeries, variational_profile

__all__ = ["GENERATOR_KINDS", "GeneratorSpec", "add_noise", "generate", "integrate"]

GENERATOR_KINDS = (
    "piecewise_poly",
    "sampled_continuous",
    "sobolev",
    "holder",
    "exact_sparse",
    "alternating",
    "constant",
)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int
    B: float = 1.0
    seed: int = 0
    k: int = 0
    knots: int = 3
    coeff_range: float = 1.0
    continuous: bool = True
    segments: int = 4
    tv: float = 1.0
    radius: float = 1.0
    J: int = 3
    M: int = 10
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ConfigurationError(f"unknown generator kind {self.kind!r}")
        if self.n < 1 or self.k < 0:
            raise ConfigurationError("need n >= 1 and k >= 0")
        if not self.B > 0:
            raise ConfigurationError(f"B must be positive, got {self.B}")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown generator fields: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def at(self, n: int, seed: int = None) -> "GeneratorSpec":
        d = asdict(self)
        d["n"] = n
        if seed is not None:
            d["seed"] = seed
        return GeneratorSpec(**d)


def integrate(d: np.ndarray, times: int) -> np.ndarray:
    """Inverse of ``diff_op`` with zero initial values: output has ``times`` extra entries."""
    v = np.asarray(d, dtype=float)
    for _ in range(times):
        v = np.concatenate([[0.0], np.cumsum(v)])
    return v


def _grid(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / n


def _truncated_power(x, c, k):
    return np.where(x > c, (x - c) ** k, 0.0) / math.factorial(k)


def _knot_fractions(rng, count: int) -> np.ndarray:
    # keep knots away from the ends and from each other
    return np.sort(rng.uniform(0.05, 0.95, size=count))


def _fit_bound(theta: np.ndarray, B: float) -> np.ndarray:
    """Centre and shrink (never clip) so that ``|theta| <= B``; both keep the class."""
    peak = np.max(np.abs(theta))
    if peak <= B:
        return theta
    theta = theta - 0.5 * (theta.max() + theta.min())
    peak = np.max(np.abs(theta))
    return theta * (B / peak) if peak > B else theta


def _piecewise_poly(spec, rng):
    k, x = spec.k, _grid(spec.n)
    knots = _knot_fractions(rng, spec.knots)
    r = spec.coeff_range
    if spec.continuous:
        base = rng.uniform(-r, r, size=k + 1)
        theta = sum(base[j] * x**j for j in range(k + 1))
        for c in knots:
            theta = theta + rng.uniform(-r, r) * _truncated_power(x, c, k)
    else:
        edges = np.concatenate([[0.0], knots, [1.0 + 1e-12]])
        theta = np.zeros(spec.n)
        for lo, hi in zip(edges[:-1], edges[1:]):
            coef = rng.uniform(-r, r, size=k + 1)
            mask = (x > lo) & (x <= hi)
            theta[mask] = sum(coef[j] * x[mask] ** j for j in range(k + 1))
    return _fit_bound(np.asarray(theta, dtype=float), spec.B)


def _sampled_continuous(spec, rng):
    """Continuous function whose ``k``-th derivative has total variation ``spec.tv``.

    For ``k >= 1`` it is a degree-``k`` spline with ``segments`` pieces whose
    ``k``-th derivative jumps sum to ``tv`` in absolute value.  For ``k = 0`` a
    continuous piecewise-constant function would be flat, so the pieces are
    linear instead, with total variation ``tv``.
    """
    k, x = spec.k, _grid(spec.n)
    if spec.segments < 1:
        raise ConfigurationError("segments must be positive")
    knots = _knot_fractions(rng, spec.segments - 1)
    if k == 0:
        edges = np.concatenate([[0.0], knots, [1.0]])
        slopes = rng.choice([-1.0, 1.0], size=spec.segments) * rng.uniform(0.5, 1.0, spec.segments)
        slopes *= spec.tv / np.sum(np.abs(slopes) * np.diff(edges))
        theta = np.zeros(spec.n)
        for j, lo in enumerate(edges[:-1]):
            theta += slopes[j] * (np.clip(x, lo, edges[j + 1]) - lo)
    else:
        amps = rng.choice([-1.0, 1.0], size=knots.size) * rng.uniform(0.5, 1.0, knots.size)
        amps *= spec.tv / np.abs(amps).sum()
        theta = sum(a * _truncated_power(x, c, k) for a, c in zip(amps, knots))
        # drop the best degree-k trend: same variation, smaller amplitude
        theta = recenter(np.asarray(theta, dtype=float), k)
    theta = theta - 0.5 * (theta.max() + theta.min())
    if np.max(np.abs(theta)) > spec.B:
        raise GenerationError(f"sampled_continuous exceeds B={spec.B}")
    return theta


def _smooth_class(spec, rng, norm: str):
    k, n = spec.k, spec.n
    m = n - k - 1
    if m < 1:
        raise GenerationError(f"n={n} too short for k={k}")
    d = rng.standard_normal(m)
    size = np.linalg.norm(d) if norm == "l2" else np.max(np.abs(d))
    d *= spec.radius / (float(n) ** k * size)
    theta = integrate(d, k + 1)
    peak = float(np.max(np.abs(theta)))
    if peak > spec.B:
        raise GenerationError(
            f"{spec.kind} radius {spec.radius} gives |theta|_inf = {peak:.4g} > B = {spec.B}; "
            f"lower the radius (the largest ball inside TV^k(C) has radius C/sqrt(n) or C/n)"
        )
    return theta


def _exact_sparse(spec, rng):
    k, n, J = spec.k, spec.n, spec.J
    m = n - k - 1
    fracs = _knot_fractions(rng, J)
    idx = np.unique(np.floor(fracs * m).astype(int))
    if idx.size != J or J > m:
        raise GenerationError(f"cannot place J={J} distinct knots for n={n}, k={k}")
    d = np.zeros(m)
    d[idx] = rng.choice([-1.0, 1.0], size=J) * rng.uniform(0.5, 1.0, J)
    theta = integrate(d, k + 1)
    theta = theta - 0.5 * (theta.max() + theta.min())
    peak = np.max(np.abs(theta))
    if peak > 0:
        theta *= 0.9 * spec.B / peak
    return theta


def _alternating(spec, rng):
    B, n = spec.B, spec.n
    states = np.array([-B, 0.0, B])
    theta = np.empty(n)
    theta[0] = rng.choice(states)
    for t in range(1, n):
        if t <= spec.M:
            choices = states[states != theta[t - 1]]
            theta[t] = rng.choice(choices)
        else:
            theta[t] = theta[t - 1]
    return theta


def _verify(spec, theta):
    if np.max(np.abs(theta)) > spec.B * (1 + 1e-12):
        raise GenerationError(f"generated sequence leaves [-B, B] with B={spec.B}")
    if spec.n < spec.k + 2:
        return
    prof = variational_profile(theta, spec.k)
    if spec.kind == "constant" and prof.jumps != 0:
        raise GenerationError("constant sequence reports nonzero variation")
    if spec.kind == "exact_sparse" and prof.jumps != spec.J:
        raise GenerationError(
            f"exact_sparse expected {spec.J} jumps, found {prof.jumps} "
            "(knot amplitudes fell below the zero tolerance at this n, k)"
        )
    if spec.kind == "sobolev" and prof.sobolev > spec.radius * (1 + 1e-9):
        raise GenerationError("sobolev radius violated")
    if spec.kind == "holder" and prof.holder > spec.radius * (1 + 1e-9):
        raise GenerationError("holder radius violated")
    if spec.kind == "alternating" and spec.k == 0 and prof.jumps > min(spec.M, spec.n - 1):
        raise GenerationError("alternating chain changes after step M")


def generate(spec: GeneratorSpec) -> TimeSeries:
    """Build the ground truth described by ``spec`` and check it against its class."""
    if spec.kind != "constant" and spec.kind != "alternating" and spec.n < spec.k + 2:
        raise GenerationError(f"need n >= k+2 = {spec.k + 2}, got {spec.n}")
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "constant":
        if abs(spec.c) > spec.B:
            raise GenerationError(f"constant {spec.c} exceeds B={spec.B}")
        theta = np.full(spec.n, float(spec.c))
    elif spec.kind == "piecewise_poly":
        theta = _piecewise_poly(spec, rng)
    elif spec.kind == "sampled_continuous":
        theta = _sampled_continuous(spec, rng)
    elif spec.kind == "sobolev":
        theta = _smooth_class(spec, rng, "l2")
    elif spec.kind == "holder":
        theta = _smooth_class(spec, rng, "linf")
    elif spec.kind == "exact_sparse":
        theta = _exact_sparse(spec, rng)
    else:
        theta = _alternating(spec, rng)
    _verify(spec, theta)
    return TimeSeries.from_theta(theta)


def add_noise(ts: TimeSeries, sigma: float, noise_kind: str = "gaussian", seed: int = 0) -> TimeSeries:
    """Return a copy of ``ts`` with ``y = theta + noise``."""
    if ts.theta is None:
        raise GenerationError("add_noise needs theta")
    if sigma < 0:
        raise ConfigurationError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.default_rng(seed)
    if noise_kind == "gaussian":
        eps = rng.normal(0.0, sigma, ts.n) if sigma > 0 else np.zeros(ts.n)
    elif noise_kind == "uniform_bounded":
        half = sigma * math.sqrt(3.0)
        eps = rng.uniform(-half, half, ts.n) if sigma > 0 else np.zeros(ts.n)
    else:
        raise ConfigurationError(f"unknown noise kind {noise_kind!r}")
    return TimeSeries(n=ts.n, theta=ts.theta, y=ts.theta + eps)
