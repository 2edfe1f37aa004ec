"""Candidate step-size sampling and Bayesian posterior updates.

Step sizes are modeled in log space (they span orders of magnitude and
must stay positive).  After every pass the observed (step, loss) pairs
are converted to weights, the weighted log-step statistics form a
sample estimate, and the posterior blends it with the prior using a
pseudo-count kappa.  A variance floor keeps exploration alive.

For joint (step size, batch size) calibration a 2-D normal with an
explicit covariance plays the same role in linear space.

The speculation degree s is adapted from iteration timing: it doubles
while extra candidates are nearly free, freezes at the first slowdown,
and halves if a later iteration degrades badly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericError


def _as_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


@dataclass(frozen=True)
class StepDistribution:
    mu_log: float
    sigma_log: float
    kappa: float = 2.0
    sigma_floor: float = 0.05

    def __post_init__(self):
        if self.sigma_log <= 0 or self.kappa <= 0 or self.sigma_floor <= 0:
            raise ConfigError("sigma_log, kappa and sigma_floor must be positive")


def sample_steps(dist: StepDistribution, s: int, rng_seed) -> list[float]:
    """Draw s positive step sizes, sorted descending for stable indexing."""
    if s < 1:
        raise ConfigError("need at least one step size")
    rng = _as_rng(rng_seed)
    draws = np.exp(rng.normal(dist.mu_log, dist.sigma_log, size=s))
    return sorted((float(a) for a in draws), reverse=True)


def loss_weights(losses: np.ndarray) -> np.ndarray:
    """Normalize losses to weights: best loss gets the most, worst gets 0.

    Adding a constant to every loss leaves the weights unchanged; fully
    tied losses fall back to uniform weights.
    """
    losses = np.asarray(losses, dtype=np.float64)
    gaps = losses.max() - losses
    total = gaps.sum()
    if total <= 0.0:
        return np.full(losses.shape, 1.0 / losses.size)
    return gaps / total


def bayes_update(dist: StepDistribution, observations) -> StepDistribution:
    """Posterior update from (alpha, loss) pairs observed in one pass."""
    if not observations:
        raise ConfigError("bayes_update needs at least one observation")
    alphas = np.array([a for a, _ in observations], dtype=np.float64)
    losses = np.array([l for _, l in observations], dtype=np.float64)
    if np.any(alphas <= 0):
        raise ConfigError("step sizes must be positive")
    if not np.all(np.isfinite(losses)):
        raise NumericError("bayes_update requires finite losses")
    w = loss_weights(losses)
    log_a = np.log(alphas)
    m_hat = float(np.sum(w * log_a))
    v_hat = float(np.sum(w * (log_a - m_hat) ** 2))
    s_eff = len(observations)
    k = dist.kappa
    mu = (k * dist.mu_log + s_eff * m_hat) / (k + s_eff)
    var = (k * dist.sigma_log ** 2 + s_eff * v_hat) / (k + s_eff)
    sigma = float(np.sqrt(max(var, dist.sigma_floor ** 2)))
    return replace(dist, mu_log=float(mu), sigma_log=sigma)


@dataclass
class SpeculationController:
    """Runtime adaptation of the speculation degree from iteration timing."""

    s: int = 1
    s_max: int = 32
    growth_threshold: float = 0.10
    shrink_threshold: float = 0.25
    baseline_iter_time: float | None = None
    growing: bool = True

    def __post_init__(self):
        if not 1 <= self.s <= self.s_max:
            raise ConfigError("speculation degree must satisfy 1 <= s <= s_max")

    def observe(self, last_iter_time: float) -> int:
        """Record one iteration's wall time and return the next s."""
        if self.baseline_iter_time is None:
            if self.s != 1:
                raise ConfigError("the timing baseline must be established at s = 1")
            self.baseline_iter_time = last_iter_time
            self.s = min(2, self.s_max)
            return self.s
        base = self.baseline_iter_time
        if self.growing:
            if last_iter_time <= (1.0 + self.growth_threshold) * base:
                self.s = min(self.s * 2, self.s_max)
                return self.s
            self.growing = False
        if last_iter_time > (1.0 + self.shrink_threshold) * base:
            self.s = max(self.s // 2, 1)
        return self.s


@dataclass(frozen=True)
class StepBatchDistribution:
    """2-D normal over (step size, batch size) with a full covariance."""

    mean: np.ndarray
    cov: np.ndarray
    kappa: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=np.float64))
        if self.mean.shape != (2,) or self.cov.shape != (2, 2):
            raise ConfigError("joint distribution needs a 2-vector mean and 2x2 covariance")
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive")
        try:
            np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            raise NumericError("covariance matrix is not positive-definite")


def default_step_batch_prior() -> StepBatchDistribution:
    return StepBatchDistribution(
        mean=np.array([0.1, 1000.0]),
        cov=np.array([[0.1, 10.0], [10.0, 10000.0]]),
    )


def draw_step_batch_raw(dist: StepBatchDistribution, s: int, rng_seed) -> np.ndarray:
    """Unclamped draws from the joint normal, shape (s, 2)."""
    if s < 1:
        raise ConfigError("need at least one draw")
    rng = _as_rng(rng_seed)
    L = np.linalg.cholesky(dist.cov)
    z = rng.standard_normal((s, 2))
    return dist.mean[None, :] + z @ L.T


def sample_step_batch(dist: StepBatchDistribution, s: int, rng_seed,
                      n_examples: int) -> list[tuple[float, int]]:
    """Draw (alpha, batch) pairs; alpha floored at 1e-8, batch in [1, N]."""
    raw = draw_step_batch_raw(dist, s, rng_seed)
    pairs = []
    for a, b in raw:
        alpha = max(float(a), 1e-8)
        batch = int(np.clip(round(float(b)), 1, n_examples))
        pairs.append((alpha, batch))
    return pairs


def bayes_update_2d(dist: StepBatchDistribution, observations) -> StepBatchDistribution:
    """Posterior update from ((alpha, batch), loss) observations."""
    if not observations:
        raise ConfigError("bayes_update_2d needs at least one observation")
    pts = np.array([[a, b] for (a, b), _ in observations], dtype=np.float64)
    losses = np.array([l for _, l in observations], dtype=np.float64)
    if not np.all(np.isfinite(losses)):
        raise NumericError("bayes_update_2d requires finite losses")
    w = loss_weights(losses)
    m_hat = w @ pts
    centered = pts - m_hat[None, :]
    c_hat = (centered * w[:, None]).T @ centered
    s_eff = len(observations)
    k = dist.kappa
    mean = (k * dist.mean + s_eff * m_hat) / (k + s_eff)
    cov = (k * dist.cov + s_eff * c_hat) / (k + s_eff)
    jitter = 1e-9
    for _ in range(8):
        try:
            np.linalg.cholesky(cov)
            break
        except np.linalg.LinAlgError:
            cov = cov + jitter * np.eye(2)
            jitter *= 10.0
    return StepBatchDistribution(mean=mean, cov=cov, kappa=dist.kappa)
