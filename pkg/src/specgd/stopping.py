"""Halting rules for estimated gradients and losses.

Three rules cooperate during an approximated pass:

* ``stop_gradient`` ends gradient estimation once the summed relative
  confidence width across all d dimensions falls below d * eps.
* ``stop_loss`` prunes candidate step sizes whose loss interval cannot
  (exact rule) or almost certainly does not (approximate and containment
  rules) contain the minimum.
* ``stop_igd_loss`` ends an incremental pass once at least m snapshot
  loss estimators have converged individually and agree within beta.

``stop_combined`` wires the first two together for the batch path: only
the exact pruning rule fires while the surviving gradient is still
uncertain, so approximately-dominated candidates stay alive until the
minimum-loss branch is known accurately.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ConfigError
from .estimators import (REL_ERR_FLOOR, EstimateReport, GradientEstimate,
                         LossEstimate)


@dataclass(frozen=True)
class StoppingConfig:
    eps: float = 0.05
    m_min_converged: int = 2
    beta: float = 0.01
    overlap_eps: float = 0.05
    containment: bool = True

    def __post_init__(self):
        if self.eps < 0 or self.beta <= 0 or self.overlap_eps < 0:
            raise ConfigError("stopping tolerances must be non-negative (beta positive)")
        if self.m_min_converged < 1:
            raise ConfigError("m_min_converged must be >= 1")

    @property
    def enabled(self) -> bool:
        # eps == 0 is an unreachable accuracy target: estimation never
        # converges, so checkpoints are skipped entirely and a pass runs
        # to the exact full-scan result.
        return self.eps > 0.0


@dataclass(frozen=True)
class PruneVerdict:
    surviving: tuple
    discarded_exact: tuple
    discarded_approx: tuple

    def partitions(self, n: int) -> bool:
        seen = sorted(self.surviving + self.discarded_exact + self.discarded_approx)
        return seen == list(range(n))


class Decision(enum.Enum):
    CONTINUE = "continue"
    STOP = "stop"


def relative_error(r: EstimateReport) -> float:
    return 2.0 * r.half_width / max(abs(r.estimate), REL_ERR_FLOOR)


def stop_gradient(g: GradientEstimate, eps: float) -> bool:
    """True when the summed per-dimension relative width is within d * eps."""
    err = 0.0
    for j in range(g.dim):
        est = abs(float(g.estimate[j]))
        err += 2.0 * float(g.half_width[j]) / max(est, REL_ERR_FLOOR)
    return err <= g.dim * eps


def _exact_discard(lows, highs, j: int) -> bool:
    """Interval i sits entirely at or below low_j; ties keep the lower index."""
    n = len(lows)
    for i in range(n):
        if i == j:
            continue
        if highs[i] <= lows[j] and (highs[j] > lows[i] or i < j):
            return True
    return False


def stop_loss(losses: LossEstimate | Sequence[EstimateReport], overlap_eps: float,
              containment: bool = True) -> PruneVerdict:
    """Partition candidates into survivors and exact/approximate discards.

    Dominance is always evaluated against the original input intervals;
    the rules are not re-applied to the shrinking survivor set.
    """
    reports = list(losses.reports if isinstance(losses, LossEstimate) else losses)
    n = len(reports)
    if n == 0:
        raise ConfigError("stop_loss needs at least one candidate")
    lows = [r.estimate - r.half_width for r in reports]
    highs = [r.estimate + r.half_width for r in reports]
    ests = [r.estimate for r in reports]
    scale = max(abs(e) for e in ests)

    exact = set()
    for j in range(n):
        if _exact_discard(lows, highs, j):
            exact.add(j)

    approx = set()
    for j in range(n):
        if j in exact:
            continue
        # Nearly-exact dominance: a small overlap still discards the upper one.
        for i in range(n):
            if i == j:
                continue
            if highs[i] <= lows[j] + overlap_eps * scale and (highs[j] > lows[i] or i < j):
                approx.add(j)
                break

    if containment:
        for j in range(n):
            for i in range(n):
                if i == j:
                    continue
                inner = lows[i] < lows[j] and highs[j] < highs[i]
                if not inner:
                    continue
                if lows[j] >= ests[i] and j not in exact:
                    # Contained at the upper end: the inner interval loses.
                    approx.add(j)
                if highs[j] <= ests[i] and i not in exact:
                    # Tight inner interval at the lower end: the wide
                    # encompassing interval loses.
                    approx.add(i)

    approx -= exact
    surviving = [j for j in range(n) if j not in exact and j not in approx]
    if not surviving:
        # Aggressive approximate tolerances can empty the candidate set;
        # keep the lowest expected loss alive (ties to the lower index).
        best = min(range(n), key=lambda j: (ests[j], j))
        exact.discard(best)
        approx.discard(best)
        surviving = [best]
    return PruneVerdict(tuple(surviving), tuple(sorted(exact)), tuple(sorted(approx)))


def stop_igd_loss(snapshots: Sequence[EstimateReport], eps: float, m: int,
                  beta: float) -> bool:
    """True when >= m snapshot estimators converged and their spread <= beta."""
    converged = [r.estimate for r in snapshots if relative_error(r) <= eps]
    if len(converged) < m:
        return False
    hi, lo = max(converged), min(converged)
    return (hi - lo) / max(abs(hi), REL_ERR_FLOOR) <= beta


@dataclass(frozen=True)
class CombinedOutcome:
    decision: Decision
    best: Optional[int]
    verdict: PruneVerdict


def stop_combined(g_per_candidate: Sequence[Optional[GradientEstimate]],
                  losses: LossEstimate, cfg: StoppingConfig) -> CombinedOutcome:
    """Joint loss-pruning / gradient-convergence decision for a batch pass.

    Loss pruning drives the outcome: only exactly-dominated candidates are
    dropped (their gradient estimation stops with them).  Once a single
    candidate remains, the pass stops when its gradient estimate converges.
    """
    if len(g_per_candidate) != len(losses):
        raise ConfigError("gradient and loss candidate lists are misaligned")
    verdict = stop_loss(losses, overlap_eps=0.0, containment=False)
    survivors = verdict.surviving
    if len(survivors) == 1:
        only = survivors[0]
        g = g_per_candidate[only]
        if g is not None and stop_gradient(g, cfg.eps):
            return CombinedOutcome(Decision.STOP, only, verdict)
    return CombinedOutcome(Decision.CONTINUE, None, verdict)
