"""Adaptive online forecasting of sequences with bounded higher-order total variation."""
from .baselines import BaselineConfig, run_baseline
from .errors import (
    AdaVawError,
    ConfigurationError,
    DimensionError,
    GenerationError,
    HorizonExhausted,
    ProtocolError,
)
from .generators import GeneratorSpec, add_noise, generate
from .harness import ExperimentConfig, PolicySpec, ScalingFit, fit_scaling, padding_demo, run_experiment
from .policy import AdaVaw, AdaVawConfig, RegretReport, meta_ewa, run_multidim, run_policy
from .regress import VawState, design_determinant, recenter
from .seq import Loss, TimeSeries, diff_op, loss_eval, tv_k, variational_profile
from .wavelet import build_basis, estimate_sigma_mad, pack, soft_threshold

__version__ = "0.1.0"
