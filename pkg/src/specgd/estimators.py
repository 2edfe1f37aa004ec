"""Mergeable sampling accumulators with confidence half-widths.

An accumulator tracks (count, sum, sum of squares) for values seen so
far.  Scaling the sample sum by population/count gives an unbiased
estimate of the population sum when the sample is uniform, which holds
for any prefix of a scan over randomly permuted storage.  Variances use
the without-replacement finite-population correction, so a full scan
reports the exact sum with a zero-width interval.

Accumulators merge by component-wise addition, which is what lets
per-worker partial aggregation reproduce the single-pass result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .errors import ConfigError, NumericError

REL_ERR_FLOOR = 1e-12


def z_value(confidence: float) -> float:
    if not 0.0 < confidence < 1.0:
        raise ConfigError(f"confidence must lie in (0, 1), got {confidence}")
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


@dataclass
class EstimatorAccumulator:
    n: int = 0
    sum: float = 0.0
    sum_sq: float = 0.0

    def accumulate(self, value: float) -> "EstimatorAccumulator":
        if not np.isfinite(value):
            raise NumericError(f"cannot accumulate non-finite value {value}")
        self.n += 1
        self.sum += value
        self.sum_sq += value * value
        return self

    def accumulate_block(self, values: np.ndarray) -> "EstimatorAccumulator":
        self.n += values.size
        self.sum += float(np.sum(values))
        self.sum_sq += float(np.sum(values * values))
        return self


def merge(a: EstimatorAccumulator, b: EstimatorAccumulator) -> EstimatorAccumulator:
    return EstimatorAccumulator(a.n + b.n, a.sum + b.sum, a.sum_sq + b.sum_sq)


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    half_width: float
    n_seen: int
    population: int

    def relative_error(self) -> float:
        return 2.0 * self.half_width / max(abs(self.estimate), REL_ERR_FLOOR)


def report(acc: EstimatorAccumulator, population: int,
           confidence: float = 0.95) -> EstimateReport:
    """Scaled-sum estimate of the population total with a confidence bound."""
    if acc.n == 0:
        raise ConfigError("cannot report an estimate from an empty accumulator")
    if acc.n > population:
        raise ConfigError(f"sample size {acc.n} exceeds population {population}")
    scale = population / acc.n
    estimate = scale * acc.sum
    if acc.n >= 2:
        s2 = (acc.sum_sq - acc.sum * acc.sum / acc.n) / (acc.n - 1)
        s2 = max(s2, 0.0)  # guard fp cancellation
    else:
        s2 = 0.0
    variance = population * population * (s2 / acc.n) * (1.0 - acc.n / population)
    half_width = z_value(confidence) * np.sqrt(max(variance, 0.0))
    return EstimateReport(estimate, float(half_width), acc.n, population)


@dataclass
class VectorAccumulator:
    """d concurrent accumulators sharing one count, used for gradients."""

    dim: int
    n: int = 0
    sum: np.ndarray = field(default=None)
    sum_sq: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.sum is None:
            self.sum = np.zeros(self.dim)
        if self.sum_sq is None:
            self.sum_sq = np.zeros(self.dim)

    def accumulate_partials(self, count: int, sum_part: np.ndarray,
                            sum_sq_part: np.ndarray) -> "VectorAccumulator":
        self.n += count
        self.sum += sum_part
        self.sum_sq += sum_sq_part
        return self

    def merge_from(self, other: "VectorAccumulator") -> "VectorAccumulator":
        return self.accumulate_partials(other.n, other.sum, other.sum_sq)


@dataclass(frozen=True)
class GradientEstimate:
    """Per-dimension estimate/half-width arrays for one gradient."""

    estimate: np.ndarray
    half_width: np.ndarray
    n_seen: int
    population: int

    @property
    def dim(self) -> int:
        return self.estimate.shape[0]

    def component(self, j: int) -> EstimateReport:
        return EstimateReport(float(self.estimate[j]), float(self.half_width[j]),
                              self.n_seen, self.population)


def report_vector(acc: VectorAccumulator, population: int,
                  confidence: float = 0.95) -> GradientEstimate:
    if acc.n == 0:
        raise ConfigError("cannot report an estimate from an empty accumulator")
    if acc.n > population:
        raise ConfigError(f"sample size {acc.n} exceeds population {population}")
    scale = population / acc.n
    estimate = scale * acc.sum
    if acc.n >= 2:
        s2 = np.maximum((acc.sum_sq - acc.sum * acc.sum / acc.n) / (acc.n - 1), 0.0)
    else:
        s2 = np.zeros_like(acc.sum)
    variance = population * population * (s2 / acc.n) * (1.0 - acc.n / population)
    half_width = z_value(confidence) * np.sqrt(np.maximum(variance, 0.0))
    return GradientEstimate(estimate, half_width, acc.n, population)


@dataclass(frozen=True)
class LossEstimate:
    """One loss report per candidate model, aligned by candidate index."""

    reports: tuple

    def __len__(self) -> int:
        return len(self.reports)

    def __getitem__(self, i) -> EstimateReport:
        return self.reports[i]
