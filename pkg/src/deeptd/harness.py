"""Synthetic experiments: sample a network, learn it back, score the fit.

Each trial draws random unit kernels and a Gaussian training set (rejecting
draws whose labels are mostly zero), estimates the kernels from the moment
tensor, resolves signs and scale, and evaluates on a fresh test set.  Trials
are independently seeded from the master seed, so batches are reproducible
and safe to run across worker threads.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .cnn import (
    Activation,
    CnnNetwork,
    diffuseness,
    estimate_cnn_gain,
    forward_batch,
    gain_condition_holds,
    parse_activation,
)
from .decomposition import AlsOptions, deeptd_estimate
from .ssa import (
    SignedEstimate,
    greedy_sign_resolve,
    oracle_sign_resolve,
    predict,
    scaled_estimate,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TrainingSet",
    "TrialResult",
    "ExperimentReport",
    "trial_seed",
    "substream_seed",
    "sample_kernels",
    "sample_dataset",
    "generate_operational_network",
    "correlation_metric",
    "test_mse",
    "run_trial",
    "run_experiment",
]

# Monte-Carlo budget for the per-trial network-gain diagnostic.  The
# standalone estimator defaults to a much larger budget; trials only need
# a coarse value for reporting.
ALPHA_MC_SAMPLES = 1024

# Give up on rejection sampling after this many draws.
MAX_NETWORK_DRAWS = 1000

CSV_HEADER = (
    "trial,seed,layer,correlation,sign_correct,test_mse,"
    "gamma,alpha_cnn,diffuseness,rejections"
)


class ConfigError(Exception):
    """Invalid experiment configuration."""


_ESTIMATORS = ("deeptd", "naivetd")
_SIGN_MODES = ("greedy", "oracle")
_DISTRIBUTIONS = ("gaussian", "rademacher")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one experiment batch.

    ``widths`` are the kernel lengths per layer; the input dimension is
    their product and the training-set size is ``oversampling`` times their
    sum.  ``estimator`` picks label centering ("deeptd") or none
    ("naivetd"); ``sign_resolution`` picks how the reported estimate fixes
    its signs.  The oracle sign pattern is computed either way, so
    ``sign_correct`` is always meaningful.
    """

    depth: int
    widths: tuple[int, ...]
    oversampling: int
    trials: int
    hidden_activation: str = "relu"
    final_activation: str = "identity"
    kernel_distribution: str = "gaussian"
    test_size: int = 10_000
    operational_threshold: float = 0.5
    master_seed: int = 0
    estimator: str = "deeptd"
    sign_resolution: str = "greedy"
    als: AlsOptions = field(default_factory=AlsOptions)

    def __post_init__(self) -> None:
        object.__setattr__(self, "widths", tuple(int(d) for d in self.widths))
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if len(self.widths) != self.depth:
            raise ConfigError(
                f"widths has {len(self.widths)} entries for depth {self.depth}"
            )
        if any(d < 1 for d in self.widths):
            raise ConfigError(f"kernel lengths must be positive, got {self.widths}")
        if self.oversampling < 1:
            raise ConfigError("oversampling must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.test_size < 1:
            raise ConfigError("test_size must be >= 1")
        if not 0.0 <= self.operational_threshold <= 1.0:
            raise ConfigError("operational_threshold must be in [0, 1]")
        if self.estimator not in _ESTIMATORS:
            raise ConfigError(f"estimator must be one of {_ESTIMATORS}")
        if self.sign_resolution not in _SIGN_MODES:
            raise ConfigError(f"sign_resolution must be one of {_SIGN_MODES}")
        if self.kernel_distribution not in _DISTRIBUTIONS:
            raise ConfigError(
                f"kernel_distribution must be one of {_DISTRIBUTIONS}"
            )
        for name in ("hidden_activation", "final_activation"):
            try:
                parse_activation(getattr(self, name))
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from None

    @property
    def input_dim(self) -> int:
        return math.prod(self.widths)

    @property
    def train_size(self) -> int:
        return self.oversampling * sum(self.widths)

    def activations(self) -> tuple[Activation, ...]:
        hidden = parse_activation(self.hidden_activation)
        final = parse_activation(self.final_activation)
        return (hidden,) * (self.depth - 1) + (final,)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        data = dict(raw)
        if "widths" in data:
            w = data["widths"]
            if isinstance(w, int):
                w = [w] * int(data.get("depth", 0))
            if not isinstance(w, list):
                raise ConfigError("widths must be an integer or a list")
            data["widths"] = tuple(w)
        if "als" in data:
            als = data["als"]
            if not isinstance(als, dict):
                raise ConfigError("als must be an object")
            als_known = {f.name for f in fields(AlsOptions)}
            als_unknown = set(als) - als_known
            if als_unknown:
                raise ConfigError(f"unknown als fields: {sorted(als_unknown)}")
            try:
                data["als"] = AlsOptions(**als)
            except ValueError as exc:
                raise ConfigError(f"als: {exc}") from None
        missing = {"depth", "widths", "oversampling", "trials"} - set(data)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out: dict = {
            "depth": self.depth,
            "widths": list(self.widths),
            "oversampling": self.oversampling,
            "trials": self.trials,
            "hidden_activation": self.hidden_activation,
            "final_activation": self.final_activation,
            "kernel_distribution": self.kernel_distribution,
            "test_size": self.test_size,
            "operational_threshold": self.operational_threshold,
            "master_seed": self.master_seed,
            "estimator": self.estimator,
            "sign_resolution": self.sign_resolution,
            "als": {
                "restarts": self.als.restarts,
                "max_iters": self.als.max_iters,
                "rel_tol": self.als.rel_tol,
                "seed": self.als.seed,
            },
        }
        return out


@dataclass
class TrainingSet:
    """Row inputs and their labels."""

    xs: np.ndarray
    ys: np.ndarray


@dataclass
class TrialResult:
    """Everything recorded about one completed trial."""

    trial: int
    seed: int
    correlations: tuple[float, ...]
    sign_correct: bool
    test_mse: float
    gamma: float
    alpha_cnn: float
    diffuseness: float
    rejections: int
    gain_condition: tuple[bool, ...]


@dataclass
class ExperimentReport:
    """A batch of trial results plus their aggregate statistics."""

    config: ExperimentConfig
    results: list[TrialResult]
    errors: list[tuple[int, str]]
    aggregates: dict | None


_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective avalanche mix on 64-bit integers."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, trial: int) -> int:
    """Independent 64-bit seed for one trial.

    Trial ``t`` gets ``mix64(master + (t+1) * golden)`` where ``golden`` is
    the SplitMix64 increment, so nearby trial indices and master seeds land
    on unrelated streams.
    """
    if trial < 0:
        raise ValueError("trial index must be >= 0")
    return _mix64((master_seed + (trial + 1) * _GOLDEN) & _MASK64)


def substream_seed(seed: int, stream: int) -> int:
    """Derived seed for one of a trial's generators (data, test, ALS, gain)."""
    return _mix64((seed + (stream + 1) * _GOLDEN) & _MASK64)


# Substream indices per trial.
_STREAM_DATA = 0
_STREAM_TEST = 1
_STREAM_ALS = 2
_STREAM_GAIN = 3


def sample_kernels(
    rng: np.random.Generator,
    widths: Sequence[int],
    distribution: str = "gaussian",
) -> list[np.ndarray]:
    """Draw one unit-norm kernel per layer.

    ``gaussian`` normalizes a standard normal vector (uniform on the
    sphere); ``rademacher`` uses uniform signs scaled by ``1/sqrt(d)``.
    """
    if distribution not in _DISTRIBUTIONS:
        raise ValueError(f"distribution must be one of {_DISTRIBUTIONS}")
    kernels = []
    for d in widths:
        if distribution == "gaussian":
            k = rng.standard_normal(d)
            nrm = np.linalg.norm(k)
            while nrm == 0.0:
                k = rng.standard_normal(d)
                nrm = np.linalg.norm(k)
            kernels.append(k / nrm)
        else:
            k = rng.integers(0, 2, size=d) * 2.0 - 1.0
            kernels.append(k / math.sqrt(d))
    return kernels


def sample_dataset(
    network: CnnNetwork, n: int, rng: np.random.Generator
) -> TrainingSet:
    """Standard normal inputs labeled by the network."""
    if n < 1:
        raise ValueError("need at least one sample")
    xs = rng.standard_normal((n, network.input_dim))
    return TrainingSet(xs=xs, ys=forward_batch(network, xs))


def generate_operational_network(
    config: ExperimentConfig, rng: np.random.Generator
) -> tuple[CnnNetwork, TrainingSet, int]:
    """Sample network and training set until enough labels are nonzero.

    ReLU outputs can be exactly zero on large parts of the input space;
    draws where fewer than ``operational_threshold`` of the training labels
    are nonzero (exact 0.0 test) are discarded, network and data together.
    Returns the accepted pair plus the number of rejected draws.
    """
    activations = config.activations()
    for attempt in range(MAX_NETWORK_DRAWS):
        kernels = sample_kernels(rng, config.widths, config.kernel_distribution)
        network = CnnNetwork(tuple(kernels), activations)
        train = sample_dataset(network, config.train_size, rng)
        if np.mean(train.ys != 0.0) >= config.operational_threshold:
            return network, train, attempt
    raise ConfigError(
        f"no draw reached {config.operational_threshold:.0%} nonzero labels "
        f"in {MAX_NETWORK_DRAWS} attempts"
    )


def correlation_metric(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Absolute inner product of two unit vectors (sign-blind alignment)."""
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    for name, v in (("estimate", estimate), ("truth", truth)):
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-6:
            raise ValueError(f"{name} is not unit norm")
    return float(abs(estimate @ truth))


def test_mse(ys: np.ndarray, predictions: np.ndarray) -> float:
    """Relative squared error ``sum (y - yhat)^2 / sum y^2``."""
    ys = np.asarray(ys, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if ys.shape != predictions.shape or ys.ndim != 1:
        raise ValueError("labels and predictions must be equal-length vectors")
    denom = float(ys @ ys)
    if denom == 0.0:
        raise ValueError("all test labels are zero; relative error undefined")
    diff = ys - predictions
    return float(diff @ diff) / denom


def run_trial(config: ExperimentConfig, trial: int) -> TrialResult:
    """Run one fully seeded trial: sample, estimate, resolve, score."""
    seed = trial_seed(config.master_seed, trial)
    data_rng = np.random.default_rng(substream_seed(seed, _STREAM_DATA))
    network, train, rejections = generate_operational_network(config, data_rng)
    activations = config.activations()

    test_rng = np.random.default_rng(substream_seed(seed, _STREAM_TEST))
    test = sample_dataset(network, config.test_size, test_rng)

    als = replace(config.als, seed=substream_seed(seed, _STREAM_ALS))
    decomposition = deeptd_estimate(
        train.xs,
        train.ys,
        config.widths,
        als,
        centered=config.estimator == "deeptd",
    )
    factors = decomposition.factors
    correlations = tuple(
        correlation_metric(f, k) for f, k in zip(factors, network.kernels)
    )

    greedy = greedy_sign_resolve(train.xs, train.ys, factors, activations)
    oracle_signs = oracle_sign_resolve(factors, network.kernels)
    estimate: SignedEstimate = greedy
    if config.sign_resolution == "oracle":
        estimate = scaled_estimate(
            train.xs, train.ys, factors, oracle_signs, activations
        )

    mse = test_mse(test.ys, predict(estimate, activations, test.xs))
    alpha = estimate_cnn_gain(
        network, ALPHA_MC_SAMPLES, substream_seed(seed, _STREAM_GAIN)
    )
    return TrialResult(
        trial=trial,
        seed=seed,
        correlations=correlations,
        sign_correct=greedy.signs == oracle_signs,
        test_mse=mse,
        gamma=estimate.gamma,
        alpha_cnn=alpha,
        diffuseness=diffuseness(network.kernels),
        rejections=rejections,
        gain_condition=tuple(gain_condition_holds(k) for k in network.kernels),
    )


def _summary_stats(values: list[float]) -> dict:
    return {
        "mean": statistics.fmean(values),
        "median": statistics.median(values),
        "std": float(np.std(values)),
    }


def aggregate_results(results: Sequence[TrialResult]) -> dict | None:
    """Mean/median/std per metric, per layer where applicable."""
    if not results:
        return None
    depth = len(results[0].correlations)
    per_layer = [
        [r.correlations[l] for r in results] for l in range(depth)
    ]
    return {
        "correlation": {
            "mean": [statistics.fmean(v) for v in per_layer],
            "median": [statistics.median(v) for v in per_layer],
            "std": [float(np.std(v)) for v in per_layer],
        },
        "sign_correct_fraction": statistics.fmean(
            1.0 if r.sign_correct else 0.0 for r in results
        ),
        "test_mse": _summary_stats([r.test_mse for r in results]),
        "gamma": _summary_stats([r.gamma for r in results]),
        "alpha_cnn": _summary_stats([r.alpha_cnn for r in results]),
        "diffuseness": _summary_stats([r.diffuseness for r in results]),
        "rejections": _summary_stats([float(r.rejections) for r in results]),
        "gain_condition_fraction": [
            statistics.fmean(
                1.0 if r.gain_condition[l] else 0.0 for r in results
            )
            for l in range(depth)
        ],
    }


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
) -> ExperimentReport:
    """Run all trials, aggregate, and optionally write result files.

    A trial that raises records its error and the batch continues.  Results
    are ordered and aggregated by trial index, so reports do not depend on
    ``threads``.  With ``out_dir`` set, writes ``summary.json`` and a
    ``trials.csv`` with one row per trial and layer.
    """
    outcomes: list[TrialResult | tuple[int, str]] = []

    def one(trial: int) -> TrialResult | tuple[int, str]:
        try:
            return run_trial(config, trial)
        except Exception as exc:  # noqa: BLE001 - recorded, not swallowed
            return (trial, f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(config.trials)))
    else:
        outcomes = [one(t) for t in range(config.trials)]

    results = [o for o in outcomes if isinstance(o, TrialResult)]
    errors = [o for o in outcomes if not isinstance(o, TrialResult)]
    report = ExperimentReport(
        config=config,
        results=results,
        errors=errors,
        aggregates=aggregate_results(results),
    )
    if out_dir is not None:
        write_report(report, Path(out_dir))
    return report


def write_report(report: ExperimentReport, out_dir: Path) -> None:
    """Write ``summary.json`` and ``trials.csv`` under ``out_dir``."""
    from . import __version__

    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "version": __version__,
        "config": report.config.to_dict(),
        "trials_completed": len(report.results),
        "aggregates": report.aggregates,
        "errors": [{"trial": t, "error": msg} for t, msg in report.errors],
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    with open(out_dir / "trials.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for r in report.results:
            for l, correlation in enumerate(r.correlations, start=1):
                writer.writerow(
                    [
                        r.trial,
                        r.seed,
                        l,
                        repr(correlation),
                        int(r.sign_correct),
                        repr(r.test_mse),
                        repr(r.gamma),
                        repr(r.alpha_cnn),
                        repr(r.diffuseness),
                        r.rejections,
                    ]
                )
