"""Experiment orchestration, scaling fits, the padding demonstration and the command line."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import BASELINE_KINDS, BaselineConfig, run_baseline
from .errors import AdaVawError, ConfigurationError, DimensionError
from .generators import GeneratorSpec, add_noise, generate
from .policy import (
    AdaVawConfig,
    RegretReport,
    StepTrace,
    meta_ewa,
    run_policy,
    write_trace_csv,
)
from .regress import recenter
from .seq import tv_k
from .wavelet import pack

__all__ = [
    "CellResult",
    "ExperimentConfig",
    "ExperimentResult",
    "PolicySpec",
    "ScalingFit",
    "fit_scaling",
    "main",
    "noise_seed",
    "padding_demo",
    "read_series_csv",
    "run_cell",
    "run_experiment",
]

SUMMARY_COLUMNS = ["policy", "n", "seed", "regret", "num_bins", "wallclock_ms"]


# --- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class PolicySpec:
    """A forecaster to run: ``kind`` is ``adavaw``, ``meta_ewa`` or a baseline kind."""

    name: str
    kind: str = "adavaw"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("adavaw", "meta_ewa") + BASELINE_KINDS:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        d = dict(d)
        kind = d.pop("kind", "adavaw")
        name = d.pop("name", kind)
        params = d.pop("params", {})
        params.update(d)
        return cls(name=name, kind=kind, params=params)


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorSpec
    policies: tuple
    n_grid: tuple
    seeds: tuple
    sigma: float = 0.25
    noise_kind: str = "gaussian"
    output_dir: Optional[str] = None
    workers: int = 1
    write_traces: bool = True

    def __post_init__(self):
        if not self.policies or not self.n_grid or not self.seeds:
            raise ConfigurationError("policies, n_grid and seeds must be nonempty")
        kmax = max([self.generator.k] + [int(p.params.get("k", 0)) for p in self.policies])
        if min(self.n_grid) < kmax + 2:
            raise ConfigurationError(f"smallest horizon must be at least k+2 = {kmax + 2}")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be nonnegative")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigurationError("policy names must be unique")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        try:
            gen = dict(d.pop("generator"))
            gen.setdefault("n", int(d["n_grid"][0]))
            policies = tuple(PolicySpec.from_dict(p) for p in d.pop("policies"))
            return cls(
                generator=GeneratorSpec.from_dict(gen),
                policies=policies,
                n_grid=tuple(int(n) for n in d.pop("n_grid")),
                seeds=tuple(int(s) for s in d.pop("seeds")),
                **d,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"invalid experiment config: {exc}") from exc


def noise_seed(seed: int, n: int) -> int:
    """Noise seed of a cell, shared by every policy that runs on it."""
    return int(np.random.SeedSequence([seed, n, 0x5EED]).generate_state(1)[0])


# --- running cells ----------------------------------------------------------------


@dataclass
class CellResult:
    policy: str
    n: int
    seed: int
    report: Optional[RegretReport] = None
    error: Optional[str] = None


def _run_spec(spec: PolicySpec, n: int, seed: int, sigma: float, y, theta):
    p = dict(spec.params)
    if spec.kind == "adavaw":
        p.setdefault("sigma", sigma if sigma > 0 else None)
        cfg = AdaVawConfig(n=n, seed=seed, **p)
        return run_policy(cfg, y, theta)
    if spec.kind == "meta_ewa":
        ks = p.pop("ks", [0, 1, 2, 3])
        B = p.get("B", 1.0)
        p.setdefault("sigma", sigma)
        cfgs = [AdaVawConfig(k=k, n=n, seed=seed, **p) for k in ks]
        return meta_ewa(cfgs, y, B, n, theta), None
    if spec.kind == "offline_wavelet":
        p.setdefault("sigma", sigma)
    return run_baseline(BaselineConfig(kind=spec.kind, n=n, seed=seed, **p), y, theta), None


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def traces_from_predictions(preds, y) -> list:
    return [StepTrace(i + 1, float(p), float(v), False, 0) for i, (p, v) in enumerate(zip(preds, y))]


def run_cell(config: ExperimentConfig, spec: PolicySpec, n: int, seed: int) -> CellResult:
    """Run one (policy, n, seed) cell; errors are captured, not raised."""
    try:
        ts = generate(config.generator.at(n, seed))
        ts = add_noise(ts, config.sigma, config.noise_kind, noise_seed(seed, n))
        report, traces = _run_spec(spec, n, seed, config.sigma, ts.y, ts.theta)
        if config.output_dir is not None:
            cell = Path(config.output_dir) / spec.name / f"n{n}" / f"seed{seed}"
            if traces is None:
                traces = traces_from_predictions(report.predictions, ts.y)
            if config.write_traces:
                _atomic_write(cell / "trace.csv", lambda p: write_trace_csv(p, traces, ts.theta))
            _atomic_write(cell / "report.json", lambda p: report.to_json(p))
        return CellResult(spec.name, n, seed, report)
    except (AdaVawError, OSError, ValueError, FloatingPointError) as exc:
        return CellResult(spec.name, n, seed, None, f"{type(exc).__name__}: {exc}")


def _run_cell_args(args):
    return run_cell(*args)


@dataclass
class ExperimentResult:
    cells: list
    summary: list  # per (policy, n): median regret

    def rows(self) -> list:
        out = []
        for c in self.cells:
            if c.report is None:
                continue
            r = c.report
            out.append(
                {
                    "policy": c.policy,
                    "n": c.n,
                    "seed": c.seed,
                    "regret": r.regret,
                    "num_bins": r.num_bins,
                    "wallclock_ms": r.wallclock_ms,
                }
            )
        return out

    @property
    def errors(self) -> list:
        return [c for c in self.cells if c.error is not None]

    def regrets(self, policy: str, n: int) -> np.ndarray:
        return np.array(
            [c.report.regret for c in self.cells if c.policy == policy and c.n == n and c.report]
        )

    def fit(self, policy: str) -> "ScalingFit":
        return fit_scaling([r for r in self.rows() if r["policy"] == policy])


def summarize(rows) -> list:
    """Median regret, bins and wallclock per (policy, n)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["policy"], r["n"]), []).append(r)
    out = []
    for (policy, n), rs in sorted(groups.items()):
        out.append(
            {
                "policy": policy,
                "n": n,
                "num_seeds": len(rs),
                "median_regret": float(np.median([r["regret"] for r in rs])),
                "median_num_bins": float(np.median([r["num_bins"] for r in rs])),
                "median_wallclock_ms": float(np.median([r["wallclock_ms"] for r in rs])),
            }
        )
    return out


def _write_csv(path, columns, rows) -> None:
    def writer(p):
        with open(p, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
            w.writeheader()
            for r in rows:
                w.writerow(r)

    _atomic_write(Path(path), writer)


def run_experiment(config: ExperimentConfig, emit_plot_data: bool = False) -> ExperimentResult:
    """Run every (policy, n, seed) cell.  Policies on the same (n, seed) see the same stream."""
    jobs = [(config, spec, n, seed) for n in config.n_grid for seed in config.seeds for spec in config.policies]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            cells = list(pool.map(_run_cell_args, jobs))
    else:
        cells = [run_cell(*job) for job in jobs]
    result = ExperimentResult(cells=cells, summary=[])
    result.summary = summarize(result.rows())
    if config.output_dir is not None:
        out = Path(config.output_dir)
        _write_csv(out / "summary.csv", SUMMARY_COLUMNS, result.rows())
        _write_csv(out / "medians.csv", list(result.summary[0]) if result.summary else ["policy"], result.summary)
        if result.errors:
            _write_csv(
                out / "errors.csv",
                ["policy", "n", "seed", "error"],
                [asdict(c) | {"report": None} for c in result.errors],
            )
        if emit_plot_data:
            long_rows = [
                {"policy": r["policy"], "n": r["n"], "seed": r["seed"], "metric": m, "value": r[m]}
                for r in result.rows()
                for m in ("regret", "num_bins", "wallclock_ms")
            ]
            _write_csv(out / "plot_data.csv", ["policy", "n", "seed", "metric", "value"], long_rows)
    return result


# --- scaling fits -----------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    points: tuple


def fit_scaling(rows) -> ScalingFit:
    """Least-squares line through ``(log n, log median regret)``.

    ``rows`` are mappings with ``n`` and ``regret`` keys (one per seed, or
    already aggregated).  Needs at least 4 horizons spanning a factor 16.
    """
    by_n: dict = {}
    for r in rows:
        by_n.setdefault(int(r["n"]), []).append(float(r["regret"]))
    ns = sorted(by_n)
    if len(ns) < 4 or ns[-1] < 16 * ns[0]:
        raise DimensionError(f"need >= 4 horizons spanning >= 16x, got {ns}")
    meds = np.array([np.median(by_n[n]) for n in ns])
    if np.any(meds <= 0):
        raise DimensionError("median regrets must be positive for a log-log fit")
    x, y = np.log(ns), np.log(meds)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ScalingFit(
        slope=float(slope),
        intercept=float(intercept),
        r2=float(min(1.0, max(0.0, r2))),
        points=tuple(zip(x.tolist(), y.tolist())),
    )


# --- padding demonstration ------------------------------------------------------------


def padding_demo(theta_window, k: int, detrend: bool = False) -> dict:
    """Compare the ``TV^k`` of pack segments against zero and mirror padding.

    The window is padded as given; with ``detrend=True`` its least-squares
    degree-``k`` fit is subtracted first.  Each quantity is ``tv_k`` of the
    resulting vector at its own length.
    """
    w = np.asarray(theta_window, dtype=float)
    if detrend:
        w = recenter(w, k)
    L = w.size
    if L < k + 2:
        raise DimensionError(f"window of length {L} too short for k={k}")
    target = 1 << (L - 1).bit_length()
    first, second = pack(w)
    packed = max(tv_k(first, k) if first.size >= k + 2 else 0.0,
                  tv_k(second, k) if second.size >= k + 2 else 0.0)
    if target == L:
        base = tv_k(w, k)
        return {"packed_tv": base, "zero_pad_tv": base, "mirror_pad_tv": base, "degenerate": True}
    zero = np.concatenate([w, np.zeros(target - L)])
    mirror = np.concatenate([w, np.resize(w[::-1], target - L)])
    return {
        "packed_tv": float(packed),
        "zero_pad_tv": tv_k(zero, k),
        "mirror_pad_tv": tv_k(mirror, k),
        "degenerate": False,
    }


# --- command line ---------------------------------------------------------------------


def read_series_csv(path):
    """Read ``t,y[,theta]`` (1-based consecutive t).  Returns ``(y, theta or None)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "t" not in reader.fieldnames or "y" not in reader.fieldnames:
            raise ConfigurationError("input CSV needs a header with at least t,y")
        ts, ys, thetas = [], [], []
        for row in reader:
            ts.append(int(row["t"]))
            ys.append(float(row["y"]))
            if "theta" in reader.fieldnames and row.get("theta", "") != "":
                thetas.append(float(row["theta"]))
    if ts != list(range(1, len(ts) + 1)):
        raise ConfigurationError("t must run 1, 2, ..., n")
    theta = np.array(thetas) if thetas and len(thetas) == len(ys) else None
    return np.array(ys), theta


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc


def _overrides(args, names) -> dict:
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    cfg.update(_overrides(args, ["kind", "n", "k", "B", "J", "segments", "tv", "radius", "M", "c", "knots"]))
    cfg["seed"] = args.seed
    spec = GeneratorSpec.from_dict(cfg)
    ts = generate(spec)
    sigma = args.sigma if args.sigma is not None else 0.0
    if sigma > 0:
        ts = add_noise(ts, sigma, args.noise, noise_seed(args.seed, spec.n))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "theta"] + (["y"] if sigma > 0 else []))
        for i in range(ts.n):
            row = [i + 1, repr(float(ts.theta[i]))]
            if sigma > 0:
                row.append(repr(float(ts.y[i])))
            w.writerow(row)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _policy_config(args, n: int) -> AdaVawConfig:
    cfg = _load_config(args.config)
    cfg.update(_overrides(args, ["k", "sigma", "B", "beta", "delta", "threshold_log_base"]))
    if args.estimate_sigma:
        cfg["sigma"] = None
    cfg["n"] = n
    cfg["seed"] = args.seed
    return AdaVawConfig(**cfg)


def _cmd_run(args) -> int:
    y, theta = read_series_csv(args.input)
    cfg = _policy_config(args, y.size)
    report, traces = run_policy(cfg, y, theta)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write(out / "trace.csv", lambda p: write_trace_csv(p, traces, theta))
        _atomic_write(out / "report.json", lambda p: report.to_json(p))
    print(report.to_json())
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_config(args.config)
    k = args.k if args.k is not None else cfg.get("k", 2)
    grid = args.n_grid or cfg.get("n_grid", [2048, 4096, 8192])
    sigma = args.sigma if args.sigma is not None else cfg.get("sigma", 0.25)
    rows = []
    for n in grid:
        y = np.random.default_rng(noise_seed(args.seed, n)).normal(0.0, sigma, n)
        start = time.perf_counter()
        run_policy(AdaVawConfig(k=k, n=n, sigma=sigma, seed=args.seed), y)
        rows.append({"n": n, "k": k, "wallclock_ms": 1e3 * (time.perf_counter() - start)})
    for prev, cur in zip(rows, rows[1:]):
        cur["ratio_vs_prev"] = cur["wallclock_ms"] / prev["wallclock_ms"]
    print(json.dumps(rows, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    if not cfg:
        raise ConfigurationError("sweep needs --config <experiment.json>")
    if args.out:
        cfg["output_dir"] = args.out
    if args.seeds:
        cfg["seeds"] = args.seeds
    else:
        cfg.setdefault("seeds", [args.seed])
    exp = ExperimentConfig.from_dict(cfg)
    result = run_experiment(exp, emit_plot_data=args.emit_plot_data)
    print(json.dumps(result.summary, indent=2))
    for c in result.errors:
        print(f"cell {c.policy} n={c.n} seed={c.seed} failed: {c.error}", file=sys.stderr)
    return 3 if result.errors else 0


def _cmd_padding_demo(args) -> int:
    cfg = _load_config(args.config)
    k = args.k if args.k is not None else cfg.get("k", 1)
    if args.input:
        window, _ = read_series_csv(args.input)
    else:
        length = args.length or cfg.get("length", 48)
        slope = args.slope if args.slope is not None else cfg.get("slope", 0.01)
        window = 0.5 + slope * np.arange(1, length + 1)
    print(json.dumps(padding_demo(window, k, detrend=args.detrend), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adavaw", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with defaults; flags override it")
        p.add_argument("--seed", type=int, required=True)
        return p

    g = common(sub.add_parser("generate", help="write a synthetic series as CSV"))
    g.add_argument("--kind")
    g.add_argument("--n", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--B", type=float)
    g.add_argument("--J", type=int)
    g.add_argument("--M", type=int)
    g.add_argument("--c", type=float)
    g.add_argument("--knots", type=int)
    g.add_argument("--segments", type=int)
    g.add_argument("--tv", type=float)
    g.add_argument("--radius", type=float)
    g.add_argument("--sigma", type=float, help="add noise and write a y column")
    g.add_argument("--noise", default="gaussian", choices=["gaussian", "uniform_bounded"])
    g.add_argument("--out")
    g.set_defaults(func=_cmd_generate)

    r = common(sub.add_parser("run", help="run the forecaster on a t,y[,theta] CSV"))
    r.add_argument("--input", required=True)
    r.add_argument("--k", type=int)
    r.add_argument("--sigma", type=float)
    r.add_argument("--estimate-sigma", action="store_true")
    r.add_argument("--B", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--delta", type=float)
    r.add_argument("--threshold-log-base", choices=["segment_length", "horizon"])
    r.add_argument("--out", help="directory for trace.csv and report.json")
    r.set_defaults(func=_cmd_run)

    b = common(sub.add_parser("bench", help="wallclock of the forecaster over a horizon grid"))
    b.add_argument("--k", type=int)
    b.add_argument("--sigma", type=float)
    b.add_argument("--n-grid", type=int, nargs="+")
    b.set_defaults(func=_cmd_bench)

    s = common(sub.add_parser("sweep", help="run an experiment grid from a JSON config"))
    s.add_argument("--out", help="output directory (overrides output_dir)")
    s.add_argument("--seeds", type=int, nargs="+")
    s.add_argument("--emit-plot-data", action="store_true")
    s.set_defaults(func=_cmd_sweep)

    d = common(sub.add_parser("padding-demo", help="TV inflation of zero and mirror padding"))
    d.add_argument("--k", type=int)
    d.add_argument("--length", type=int)
    d.add_argument("--slope", type=float)
    d.add_argument("--input")
    d.add_argument("--detrend", action="store_true")
    d.set_defaults(func=_cmd_padding_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DimensionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (AdaVawError, OSError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
