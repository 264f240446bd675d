"""Measure how cumulative regret grows with the horizon.

Runs a small sweep over dyadic horizons on a smooth bounded-variation
sequence and fits a log-log slope to the median regret per horizon.  The
adaptive forecaster grows sublinearly, while a fixed-window moving average
pays a constant bias per step and grows linearly.  Five seeds and short
horizons keep the run quick, so the fitted slope is noisier than a full
sweep would give.
"""
from adavaw import ExperimentConfig, GeneratorSpec, PolicySpec, run_experiment

cfg = ExperimentConfig(
    generator=GeneratorSpec("sampled_continuous", n=512, k=0, tv=1.0),
    policies=(
        PolicySpec("adaptive", "adavaw", {"k": 0, "beta": 3.0}),
        PolicySpec("moving_avg", "moving_average", {"w": 8}),
    ),
    n_grid=(512, 1024, 2048, 4096, 8192),
    seeds=tuple(range(5)),
    sigma=0.25,
)
result = run_experiment(cfg)
for row in result.summary:
    print(f"{row['policy']:<11} n={row['n']:>5}  median regret {row['median_regret']:8.2f}")
for name in ("adaptive", "moving_avg"):
    fit = result.fit(name)
    print(f"{name:<11} slope {fit.slope:.3f}  r2 {fit.r2:.3f}")
