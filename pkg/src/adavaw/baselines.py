"""Comparator forecasters and the offline wavelet-shrinkage oracle."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, fields
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, DimensionError
from .policy import RegretReport
from .wavelet import build_basis, estimate_sigma_mad, pack, soft_threshold

__all__ = [
    "BASELINE_KINDS",
    "BaselineConfig",
    "default_batch_len",
    "moving_average",
    "offline_wavelet",
    "ogd",
    "restarting_ogd",
    "run_baseline",
]

BASELINE_KINDS = ("moving_average", "ogd", "restarting_ogd", "offline_wavelet")


def default_batch_len(n: int, c_n: float) -> int:
    """``ceil(sqrt(n / max(1, C_n)))``."""
    return max(1, math.ceil(math.sqrt(n / max(1.0, c_n))))


@dataclass(frozen=True)
class BaselineConfig:
    kind: str
    n: int
    w: int = 1
    step: Union[str, float] = "inv_t"
    batch_len: Optional[int] = None
    C_n: float = 1.0
    k: int = 0
    sigma: Optional[float] = None
    B: float = 1.0
    seed: int = 0
    threshold_coarse: bool = False

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ConfigurationError(f"unknown baseline kind {self.kind!r}")
        if self.n < 1:
            raise ConfigurationError("n must be positive")
        if self.w < 1:
            raise ConfigurationError(f"window w must be >= 1, got {self.w}")
        if self.batch_len is not None and self.batch_len < 1:
            raise ConfigurationError(f"batch_len must be >= 1, got {self.batch_len}")
        if self.step != "inv_t" and not (isinstance(self.step, (int, float)) and self.step > 0):
            raise ConfigurationError(f"step must be 'inv_t' or a positive number, got {self.step!r}")
        if not self.B > 0:
            raise ConfigurationError("B must be positive")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigurationError("sigma must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown baseline fields: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def moving_average(y, w: int) -> np.ndarray:
    """Prediction at ``t`` is the mean of the last ``w`` observations before ``t``."""
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.size)
    # warm-up steps see fewer than w observations
    for t in range(1, min(w, y.size)):
        out[t] = y[:t].mean()
    if y.size > w:
        out[w:] = np.lib.stride_tricks.sliding_window_view(y[:-1], w).mean(axis=1)
    return out


def ogd(y, B: float, step="inv_t", batch_len: Optional[int] = None) -> np.ndarray:
    """Projected gradient descent on ``(x - y_t)^2``, optionally restarted every ``batch_len`` steps.

    ``step='inv_t'`` uses ``1 / (2 t)`` with ``t`` counted inside the batch,
    which makes every batch a running mean of its observations.
    """
    y = np.asarray(y, dtype=float)
    preds = np.empty(y.size)
    x, t_in = 0.0, 0
    for i, yi in enumerate(y):
        if batch_len is not None and i % batch_len == 0:
            x, t_in = 0.0, 0
        t_in += 1
        preds[i] = x
        eta = 1.0 / (2.0 * t_in) if step == "inv_t" else float(step)
        x = min(B, max(-B, x - eta * 2.0 * (x - yi)))
    return preds


def restarting_ogd(y, B: float, batch_len: int) -> np.ndarray:
    return ogd(y, B, "inv_t", batch_len)


def _shrink_dyadic(seg, k, lam, threshold_coarse):
    basis = build_basis(seg.size, k)
    coeffs = basis.forward(seg)
    shrunk = soft_threshold(coeffs, lam)
    if not threshold_coarse:
        p = basis.coarse_count
        shrunk[:p] = coeffs[:p]
    return basis.inverse(shrunk)


def offline_wavelet(y, k: int, sigma: float, threshold_coarse: bool = False) -> np.ndarray:
    """Batch estimate: transform, soft-threshold at ``sigma sqrt(2 log n)``, invert.

    Detail coefficients are always shrunk; the coarse block only when
    ``threshold_coarse`` is set.  A non-dyadic stream is covered by its two
    pack segments and the estimates are averaged where they overlap.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 2:
        raise DimensionError("offline_wavelet needs at least 2 observations")
    lam = sigma * math.sqrt(2.0 * math.log(n))
    first, second = pack(y)
    size = first.size
    est = np.zeros(n)
    hits = np.zeros(n)
    est[:size] += _shrink_dyadic(first, k, lam, threshold_coarse)
    hits[:size] += 1
    if size != n:
        est[n - size :] += _shrink_dyadic(second, k, lam, threshold_coarse)
        hits[n - size :] += 1
    return est / hits


def run_baseline(config: BaselineConfig, y, theta=None) -> RegretReport:
    """Run a comparator.  For the offline oracle ``regret`` is its total squared error."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < config.n:
        raise DimensionError(f"stream has {y.size} entries, horizon is {config.n}")
    y = y[: config.n]
    start = time.perf_counter()
    extras = {}
    if config.kind == "moving_average":
        preds = moving_average(y, config.w)
    elif config.kind == "ogd":
        preds = ogd(y, config.B, config.step)
    elif config.kind == "restarting_ogd":
        bl = config.batch_len or default_batch_len(config.n, config.C_n)
        extras["batch_len"] = bl
        preds = restarting_ogd(y, config.B, bl)
    else:
        sigma = config.sigma
        if sigma is None:
            sigma = estimate_sigma_mad(y, 0)
        preds = offline_wavelet(y, config.k, sigma, config.threshold_coarse)
    wall = 1e3 * (time.perf_counter() - start)
    observed = float(np.sum((preds - y) ** 2))
    target = y if theta is None else np.asarray(theta, dtype=float)
    sq = float(np.sum((preds - target) ** 2))
    if config.kind == "offline_wavelet":
        extras["mse"] = sq / config.n
    return RegretReport(
        regret=sq,
        n=config.n,
        k=config.k if config.kind == "offline_wavelet" else None,
        num_bins=0,
        beta=None,
        sigma=config.sigma,
        seed=config.seed,
        wallclock_ms=wall,
        policy=config.kind,
        predictions=preds,
        observed_loss=observed,
        extras=extras,
    )
