"""The adaptive restarting VAW forecaster, its EWA meta-policy and a multi-dimensional runner.

The forecaster splits time into bins.  Inside a bin it predicts with a VAW
polynomial fit; after every observation it recenters the bin's window,
packs it into two dyadic segments, soft-thresholds their wavelet
coefficients and restarts when the surviving energy exceeds ``sigma``.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, HorizonExhausted, ProtocolError
from .regress import VawState, recenter
from .wavelet import build_basis, coarse_count, estimate_sigma_mad, soft_threshold

__all__ = [
    "AdaVaw",
    "AdaVawConfig",
    "BinRecord",
    "RegretReport",
    "StepTrace",
    "default_beta",
    "ewa_aggregate",
    "meta_ewa",
    "meta_eta",
    "read_trace_csv",
    "run_multidim",
    "run_policy",
    "write_trace_csv",
]

LOG_BASES = ("segment_length", "horizon")
MAD_PREFIX = 512


def default_beta(n: int, delta: float) -> float:
    """``24 + 8 log(8/delta) / log n`` (for ``n = 1`` the log term is dropped)."""
    if not 0 < delta <= 1:
        raise ConfigurationError(f"delta must lie in (0, 1], got {delta}")
    if n < 2:
        return 24.0
    return 24.0 + 8.0 * math.log(8.0 / delta) / math.log(n)


@dataclass(frozen=True)
class AdaVawConfig:
    k: int
    n: int
    sigma: Optional[float] = 1.0
    B: float = 1.0
    beta: Optional[float] = None
    delta: float = 0.1
    threshold_log_base: str = "segment_length"
    seed: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ConfigurationError(f"k must be nonnegative, got {self.k}")
        if self.n < 1:
            raise ConfigurationError(f"horizon must be positive, got {self.n}")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if not self.B > 0:
            raise ConfigurationError(f"B must be positive, got {self.B}")
        if not 0 < self.delta <= 1:
            raise ConfigurationError(f"delta must lie in (0, 1], got {self.delta}")
        if self.beta is not None and not self.beta > 0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.threshold_log_base not in LOG_BASES:
            raise ConfigurationError(
                f"threshold_log_base must be one of {LOG_BASES}, got {self.threshold_log_base!r}"
            )
        if self.seed < 0:
            raise ConfigurationError("seed must be unsigned")

    @property
    def effective_beta(self) -> float:
        return self.beta if self.beta is not None else default_beta(self.n, self.delta)

    def with_sigma(self, sigma: float) -> "AdaVawConfig":
        d = asdict(self)
        d["sigma"] = sigma
        return AdaVawConfig(**d)


@dataclass
class BinRecord:
    start: int
    end: int
    restart_statistic: float = 0.0


@dataclass(frozen=True)
class StepTrace:
    t: int
    prediction: float
    observation: float
    restarted: bool
    bin_id: int
    statistic: float = 0.0


@dataclass
class RegretReport:
    """Outcome of one run.  ``regret`` is against ``theta`` when known, else against ``y``."""

    regret: float
    n: int
    k: Optional[int]
    num_bins: int
    beta: Optional[float]
    sigma: Optional[float]
    seed: int
    wallclock_ms: float
    policy: str = "adavaw"
    predictions: np.ndarray = field(default=None, repr=False)
    observed_loss: float = float("nan")
    coordinate_regrets: Optional[list] = None
    extras: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        keys = ("regret", "n", "k", "num_bins", "beta", "sigma", "seed", "wallclock_ms")
        return {key: getattr(self, key) for key in keys}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


class AdaVaw:
    """Online forecaster driven by a two-phase ``predict()`` / ``observe(y)`` protocol."""

    def __init__(self, config: AdaVawConfig):
        if config.sigma is None:
            raise ConfigurationError("AdaVaw needs a known sigma; run_policy can estimate it")
        self.config = config
        self.k = config.k
        self.n = config.n
        self.sigma = float(config.sigma)
        self.beta = config.effective_beta
        self.p = coarse_count(self.k)
        self.t = 1
        self.bin_start = max(self.k, 1)
        self.bin_id = 0
        self.bins: list[BinRecord] = []
        self.last_statistic = 0.0
        self._y = np.zeros(self.n)
        self._pending: Optional[float] = None
        self._feature: Optional[np.ndarray] = None
        self._vaw = VawState(self.k)
        self._powers = np.arange(self.k + 1, dtype=float)

    # window of the current bin starts k steps before it, clamped to time 1
    @property
    def window_start(self) -> int:
        return max(1, self.bin_start - self.k)

    def _feature_at(self, s: int) -> np.ndarray:
        return float(s - self.window_start + 1) ** self._powers

    def _open_bin(self) -> None:
        self._vaw = VawState(self.k)
        for s in range(self.window_start, self.bin_start):
            x = self._feature_at(s)
            self._vaw.absorb_feature(x)
            self._vaw.absorb_label(x, self._y[s - 1])
        self.bins.append(BinRecord(start=self.bin_start, end=self.bin_start))

    def threshold(self, segment_length: int) -> float:
        base = segment_length if self.config.threshold_log_base == "segment_length" else self.n
        return self.sigma * math.sqrt(self.beta * math.log(base)) if base > 1 else 0.0

    def predict(self) -> float:
        if self.t > self.n:
            raise HorizonExhausted(f"horizon n={self.n} already exhausted")
        if self._pending is not None:
            raise ProtocolError(f"prediction for t={self.t} already issued; call observe()")
        if self.t < self.k:
            pred = 0.0
        else:
            if self.t == self.bin_start:
                self._open_bin()
            x = self._feature_at(self.t)
            self._vaw.absorb_feature(x)
            self._feature = x
            pred = self._vaw.predict(x)
        self._pending = pred
        return pred

    def restart_statistic(self) -> float:
        """Soft-thresholded wavelet energy of the packed, recentered window ending at ``t``."""
        ws = self.window_start
        length = self.t - ws + 1
        if length < 2 * self.p:
            return 0.0
        resid = recenter(self._y[ws - 1 : self.t], self.k)
        size = 1 << (length.bit_length() - 1)
        basis = build_basis(size, self.k)
        lam = self.threshold(size)
        if size == length:
            alpha = soft_threshold(basis.forward(resid), lam)
            return 2.0 * float(np.linalg.norm(alpha))
        coeffs = basis.forward(np.stack([resid[:size], resid[length - size :]]))
        alpha = soft_threshold(coeffs, lam)
        return float(np.linalg.norm(alpha[0]) + np.linalg.norm(alpha[1]))

    def observe(self, y: float) -> StepTrace:
        if self._pending is None:
            raise ProtocolError(f"observe() called before predict() at t={self.t}")
        t, pred = self.t, self._pending
        y = float(y)
        self._y[t - 1] = y
        restarted = False
        stat = 0.0
        bin_id = self.bin_id
        if t >= self.k and t >= self.bin_start:
            self._vaw.absorb_label(self._feature, y)
            stat = self.restart_statistic()
            self.last_statistic = stat
            rec = self.bins[-1]
            rec.end = t
            rec.restart_statistic = stat
            if stat > self.sigma:
                restarted = True
                self.bin_start = t + 1
                self.bin_id += 1
        self._pending = None
        self._feature = None
        self.t += 1
        return StepTrace(t, pred, y, restarted, bin_id, stat)

    @property
    def num_bins(self) -> int:
        return len(self.bins)


def _resolve_sigma(config: AdaVawConfig, y: np.ndarray) -> AdaVawConfig:
    if config.sigma is not None:
        return config
    prefix = y[: min(y.size, MAD_PREFIX)]
    try:
        est = estimate_sigma_mad(prefix, config.k)
    except DimensionError:
        est = estimate_sigma_mad(prefix, 0)
    return config.with_sigma(max(est, 1e-12))


def run_policy(config: AdaVawConfig, y: Iterable[float], theta=None):
    """Run the forecaster over a full stream.

    Returns ``(RegretReport, list[StepTrace])``.  When ``config.sigma`` is
    None it is estimated by MAD on the first 512 observations.
    """
    y = np.asarray(list(y) if not isinstance(y, np.ndarray) else y, dtype=float)
    if y.ndim != 1 or y.size < config.n:
        raise DimensionError(f"stream has {y.size} entries, horizon is {config.n}")
    y = y[: config.n]
    if theta is not None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (config.n,):
            raise DimensionError(f"theta has shape {theta.shape}, expected ({config.n},)")
    config = _resolve_sigma(config, y)
    start = time.perf_counter()
    policy = AdaVaw(config)
    traces = []
    preds = np.empty(config.n)
    for i in range(config.n):
        preds[i] = policy.predict()
        traces.append(policy.observe(y[i]))
    wall = 1e3 * (time.perf_counter() - start)
    observed = float(np.sum((preds - y) ** 2))
    regret = float(np.sum((preds - theta) ** 2)) if theta is not None else observed
    report = RegretReport(
        regret=regret,
        n=config.n,
        k=config.k,
        num_bins=policy.num_bins,
        beta=policy.beta,
        sigma=policy.sigma,
        seed=config.seed,
        wallclock_ms=wall,
        predictions=preds,
        observed_loss=observed,
        extras={"bins": policy.bins, "threshold_log_base": config.threshold_log_base},
    )
    return report, traces


def write_trace_csv(path, traces: Sequence[StepTrace], theta=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y", "theta", "prediction", "restarted", "bin_id"])
        for tr in traces:
            th = "" if theta is None else repr(float(theta[tr.t - 1]))
            w.writerow(
                [tr.t, repr(tr.observation), th, repr(tr.prediction), int(tr.restarted), tr.bin_id]
            )


def read_trace_csv(path) -> dict:
    """Load a trace CSV into arrays keyed by column name (blank theta becomes NaN)."""
    cols = {"t": [], "y": [], "theta": [], "prediction": [], "restarted": [], "bin_id": []}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for key in cols:
                val = row[key]
                cols[key].append(float(val) if val != "" else float("nan"))
    return {key: np.asarray(v) for key, v in cols.items()}


def meta_eta(B: float, n: int) -> float:
    return 1.0 / (4.0 * (B + math.sqrt(2.0 * math.log(2.0 * n * n))) ** 2)


def ewa_aggregate(predictions, y, eta: float):
    """Exponentially weighted average of expert predictions (rows are time steps).

    The weight of expert ``i`` at step ``t`` is proportional to
    ``exp(-eta * sum_{s<t} (y_s - p_{s,i})^2)``.  Returns the aggregated
    predictions and the weight matrix.
    """
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(y, dtype=float)
    if p.ndim != 2 or p.shape[0] != y.size:
        raise DimensionError(f"predictions shape {p.shape} does not match {y.size} observations")
    losses = (y[:, None] - p) ** 2
    cum = np.vstack([np.zeros(p.shape[1]), np.cumsum(losses, axis=0)[:-1]])
    logw = -eta * cum
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    return np.einsum("ij,ij->i", w, p), w


def meta_ewa(
    configs: Sequence[AdaVawConfig], y, B: float, n: int, theta=None, eta: Optional[float] = None
) -> RegretReport:
    """EWA over Ada-VAW instances sharing one stream.

    Each instance's prediction is clipped to ``[-B, B]``; weights decay with
    the cumulative squared loss against the observations.  The instances
    never see the weights, so they are run first and aggregated afterwards.
    """
    if not configs:
        raise ConfigurationError("meta_ewa needs at least one instance")
    y = np.asarray(y, dtype=float)
    if y.size < n:
        raise DimensionError(f"stream has {y.size} entries, horizon is {n}")
    y = y[:n]
    eta = meta_eta(B, n) if eta is None else eta
    start = time.perf_counter()
    instances = [AdaVaw(c) for c in configs]
    inst_preds = np.empty((n, len(instances)))
    for i in range(n):
        for j, inst in enumerate(instances):
            inst_preds[i, j] = inst.predict()
            inst.observe(y[i])
    np.clip(inst_preds, -B, B, out=inst_preds)
    preds, weights = ewa_aggregate(inst_preds, y, eta)
    wall = 1e3 * (time.perf_counter() - start)
    target = y if theta is None else np.asarray(theta, dtype=float)
    regret = float(np.sum((preds - target) ** 2))
    inst_regret = np.sum((inst_preds - target[:, None]) ** 2, axis=0)
    cum = np.sum((y[:, None] - inst_preds) ** 2, axis=0)
    final = np.exp(-eta * (cum - cum.min()))
    return RegretReport(
        regret=regret,
        n=n,
        k=None,
        num_bins=sum(inst.num_bins for inst in instances),
        beta=None,
        sigma=configs[0].sigma,
        seed=configs[0].seed,
        wallclock_ms=wall,
        policy="meta_ewa",
        predictions=preds,
        observed_loss=float(np.sum((preds - y) ** 2)),
        extras={
            "eta": eta,
            "instance_regrets": inst_regret,
            "instance_observed_losses": cum,
            "instance_predictions": inst_preds,
            "weights": weights,
            "final_weights": final / final.sum(),
        },
    )


def run_multidim(config: AdaVawConfig, streams, theta=None) -> RegretReport:
    """Independent forecasters per coordinate; ``streams`` has shape ``(d, n)``."""
    rows = [np.asarray(s, dtype=float) for s in streams]
    if not rows:
        raise DimensionError("need at least one coordinate stream")
    if any(r.ndim != 1 or r.size != config.n for r in rows):
        raise DimensionError("all coordinate streams must have length n")
    thetas = [None] * len(rows)
    if theta is not None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(rows), config.n):
            raise DimensionError(f"theta has shape {theta.shape}, expected ({len(rows)}, {config.n})")
        thetas = list(theta)
    start = time.perf_counter()
    reports = [run_policy(config, r, th)[0] for r, th in zip(rows, thetas)]
    wall = 1e3 * (time.perf_counter() - start)
    return RegretReport(
        regret=float(sum(r.regret for r in reports)),
        n=config.n,
        k=config.k,
        num_bins=sum(r.num_bins for r in reports),
        beta=reports[0].beta,
        sigma=reports[0].sigma,
        seed=config.seed,
        wallclock_ms=wall,
        policy="multidim",
        predictions=np.stack([r.predictions for r in reports]),
        observed_loss=float(sum(r.observed_loss for r in reports)),
        coordinate_regrets=[r.regret for r in reports],
    )
