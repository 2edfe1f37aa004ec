"""Batch gradient-descent passes: exact, speculative, and approximated.

One shared scan evaluates s candidate models at once, accumulating for
every candidate both its loss and its gradient.  The selected
candidate's gradient therefore already exists when the next set of
candidates is generated, which is what removes the extra gradient pass
per iteration.

The approximated variant runs the same scan from a random start block
and consults loss/gradient estimators at scheduled checkpoints: losses
prune candidates (exact dominance only, so no plausible minimum is ever
dropped early), and once a single candidate remains the pass ends as
soon as its gradient estimate converges.  With the unreachable
tolerance eps = 0 checkpoints are skipped and the pass reproduces the
speculative result bit for bit.

Floating-point discipline: per-chunk partial sums are folded strictly
in scan order, so results do not depend on the worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data_store import DatasetHandle
from ..errors import ConfigError, NumericError, StepFailureError
from ..estimators import (EstimateReport, EstimatorAccumulator, LossEstimate,
                          VectorAccumulator, report, report_vector)
from ..stopping import Decision, StoppingConfig, stop_combined
from ..task_math import (Model, Reg, TaskSpec, block_loss_and_coef, block_losses,
                         check_finite_vector, grad_partial, regularizer_subgradient,
                         regularizer_value)
from .pool import ordered_map
from .schedule import CheckSchedule
from .scan import DEFAULT_CHUNK_ROWS, chunk_arrays, chunk_block_count, plan_chunks


@dataclass
class PassResult:
    loss_sums: np.ndarray               # (k,) loss-term sums, exact fold
    grad_sums: Optional[np.ndarray]     # (k, d) loss-term gradient sums
    examples: int


def _chunk_task(ds, task, W, run, with_grad, with_sq):
    X, y, rows = chunk_arrays(ds, run)
    if with_grad:
        L, C = block_loss_and_coef(task, X, y, W)
        G = grad_partial(C, X)
    else:
        L = block_losses(task, X, y, W)
        C = G = None
    loss_part = L.sum(axis=0)
    if not with_sq:
        return rows, loss_part, G, None, None
    loss_sq = (L * L).sum(axis=0)
    grad_sq = grad_partial(C * C, X * X) if with_grad else None
    return rows, loss_part, G, loss_sq, grad_sq


def full_pass(ds: DatasetHandle, task: TaskSpec, W: np.ndarray, with_grad=True,
              start_block=0, workers=1, chunk_rows=DEFAULT_CHUNK_ROWS) -> PassResult:
    """Exact loss (and gradient) sums for k models in one shared scan."""
    runs = plan_chunks(ds, start_block, chunk_block_count(ds.header.block_size, chunk_rows))
    k = W.shape[0]
    loss_sums = np.zeros(k)
    grad_sums = np.zeros((k, ds.dim)) if with_grad else None
    seen = 0
    for rows, loss_part, G, _, _ in ordered_map(
            lambda run: _chunk_task(ds, task, W, run, with_grad, False), runs, workers):
        seen += rows
        loss_sums += loss_part
        if with_grad:
            grad_sums += G
    return PassResult(loss_sums, grad_sums, seen)


def exact_objective(ds, task, model: Model, workers=1) -> float:
    """Full objective: summed loss terms plus one regularizer penalty."""
    res = full_pass(ds, task, model.weights[None, :], with_grad=False, workers=workers)
    return float(res.loss_sums[0]) + regularizer_value(task, model)


def full_gradient_vec(task: TaskSpec, loss_grad: np.ndarray, model: Model) -> np.ndarray:
    # The penalty subgradient enters once per objective gradient; skipping
    # the addition entirely for reg NONE keeps plain/speculative paths
    # bit-identical.
    if task.reg is Reg.NONE or task.mu == 0.0:
        return loss_grad
    return loss_grad + regularizer_subgradient(task, model)


def bgd_iterate(model: Model, task: TaskSpec, ds: DatasetHandle, alpha: float,
                workers=1, start_block=0):
    """One exact batch step; returns (new model, objective of input model)."""
    if alpha < 0:
        raise ConfigError("step size must be non-negative")
    res = full_pass(ds, task, model.weights[None, :], start_block=start_block,
                    workers=workers)
    g_loss = res.grad_sums[0]
    check_finite_vector(g_loss, "gradient")
    g = full_gradient_vec(task, g_loss, model)
    new_w = model.weights - alpha * g
    check_finite_vector(new_w, "updated model")
    loss = float(res.loss_sums[0]) + regularizer_value(task, model)
    return Model(new_w, model.iter + 1), loss


@dataclass
class SpecBgdState:
    """Carries the selected model and its already-accumulated gradient."""

    model: Model
    grad_loss: np.ndarray  # loss-term gradient at `model` (exact or estimated)


def bootstrap_state(ds, task, model: Model, workers=1) -> tuple[SpecBgdState, float, int]:
    """Initial gradient pass that seeds the first speculative iteration."""
    res = full_pass(ds, task, model.weights[None, :], workers=workers)
    check_finite_vector(res.grad_sums[0], "gradient")
    loss = float(res.loss_sums[0]) + regularizer_value(task, model)
    return SpecBgdState(model, res.grad_sums[0]), loss, res.examples


def build_candidates(state: SpecBgdState, task: TaskSpec, steps) -> np.ndarray:
    g = full_gradient_vec(task, state.grad_loss, state.model)
    steps = np.asarray(steps, dtype=np.float64)
    W = state.model.weights[None, :] - steps[:, None] * g[None, :]
    return W


def select_candidate(losses, steps) -> int:
    """Minimum objective wins; ties go to the smaller step size."""
    best = None
    for i, L in enumerate(losses):
        if not math.isfinite(L):
            continue
        if best is None or L < losses[best] or (L == losses[best] and steps[i] < steps[best]):
            best = i
    if best is None:
        raise NumericError("every candidate produced a non-finite loss")
    return best


@dataclass
class BgdEpochResult:
    state: SpecBgdState
    selected: int
    loss: float
    loss_half_width: float
    exact: bool
    candidate_losses: list
    examples_seen: int
    scanned_fraction: float
    checks: int = 0


def speculative_bgd_epoch(state: SpecBgdState, task, ds, steps, start_block=0,
                          workers=1) -> BgdEpochResult:
    """Evaluate all candidate steps in one shared full scan, keep the best."""
    W = build_candidates(state, task, steps)
    res = full_pass(ds, task, W, start_block=start_block, workers=workers)
    regs = [regularizer_value(task, Model(W[i])) for i in range(W.shape[0])]
    losses = [float(res.loss_sums[i]) + regs[i] for i in range(W.shape[0])]
    best = select_candidate(losses, steps)
    g_best = res.grad_sums[best]
    check_finite_vector(g_best, "gradient")
    new_state = SpecBgdState(Model(W[best], state.model.iter + 1), g_best)
    return BgdEpochResult(new_state, best, losses[best], 0.0, True, losses,
                          res.examples, 1.0)


def approximate_bgd_epoch(state: SpecBgdState, task, ds, steps,
                          stopping: StoppingConfig, start_block=0, workers=1,
                          first_frac=0.01, confidence=0.95) -> BgdEpochResult:
    """Shared scan with online estimation and early stopping.

    Checkpoints follow a geometric schedule over examples consumed and
    densify when the loss estimate stagnates.
    """
    if not stopping.enabled:
        return speculative_bgd_epoch(state, task, ds, steps, start_block, workers)

    W = build_candidates(state, task, steps)
    s = W.shape[0]
    n = ds.n
    regs = [regularizer_value(task, Model(W[i])) for i in range(s)]
    schedule = CheckSchedule(n, first_frac=first_frac)
    runs = plan_chunks(ds, start_block,
                       chunk_block_count(ds.header.block_size, schedule.unit))
    tracker = schedule.tracker()

    loss_acc = [EstimatorAccumulator() for _ in range(s)]
    grad_acc = [VectorAccumulator(ds.dim) for _ in range(s)]
    active = list(range(s))
    frozen: dict[int, EstimateReport] = {}
    seen = 0
    prev_min_est = None

    def jobs():
        # Snapshot the active set at submission time so chunks computed
        # ahead by the pool stay attributable after a prune.
        for run in runs:
            yield run, tuple(active)

    def run_job(job):
        run, ids = job
        return ids, _chunk_task(ds, task, W[list(ids)], run, True, True)

    pending = ordered_map(run_job, jobs(), workers)

    def current_report(cid):
        r = report(loss_acc[cid], n, confidence)
        return EstimateReport(r.estimate + regs[cid], r.half_width, r.n_seen,
                              r.population)

    stop_best = None
    for ids, (rows, loss_part, G, loss_sq, grad_sq) in pending:
        seen += rows
        for pos, cid in enumerate(ids):
            loss_acc[cid].n += rows
            loss_acc[cid].sum += float(loss_part[pos])
            loss_acc[cid].sum_sq += float(loss_sq[pos])
            grad_acc[cid].accumulate_partials(rows, G[pos], grad_sq[pos])
        if seen >= n or not tracker.due(seen):
            continue
        # Checkpoint: the coordinator merges estimator state and tests.
        passed = list(active)
        reports = {cid: frozen.get(cid) or current_report(cid) for cid in range(s)}
        outcome = stop_combined([report_vector(grad_acc[cid], n, confidence)
                                 for cid in passed],
                                LossEstimate(tuple(reports[cid] for cid in passed)),
                                stopping)
        for j in outcome.verdict.discarded_exact:
            frozen[passed[j]] = reports[passed[j]]
        active = [passed[j] for j in outcome.verdict.surviving]
        if outcome.decision is Decision.STOP:
            stop_best = passed[outcome.best]
            pending.close()
            break
        min_est = min(reports[cid].estimate for cid in active)
        stagnant = (prev_min_est is not None and
                    abs(min_est - prev_min_est) <
                    0.1 * stopping.eps * max(abs(prev_min_est), 1e-12))
        tracker.advance(seen, stagnant)
        prev_min_est = min_est

    if stop_best is not None:
        cid = stop_best
        g_est = (n / grad_acc[cid].n) * grad_acc[cid].sum
        check_finite_vector(g_est, "gradient estimate")
        r = report(loss_acc[cid], n, confidence)
        loss_val = r.estimate + regs[cid]
        cand_losses = [frozen[c].estimate if c in frozen else
                       report(loss_acc[c], n, confidence).estimate + regs[c]
                       for c in range(s)]
        cand_losses[cid] = loss_val
        new_state = SpecBgdState(Model(W[cid], state.model.iter + 1), g_est)
        return BgdEpochResult(new_state, cid, loss_val, r.half_width, False,
                              cand_losses, seen, seen / n, tracker.checks_done)

    # Full scan: survivors carry exact sums, so selection matches the
    # speculative pass exactly.
    losses = {}
    for cid in active:
        losses[cid] = loss_acc[cid].sum + regs[cid]
    best = select_candidate([losses.get(c, math.inf) for c in range(s)],
                            list(steps))
    g_best = grad_acc[best].sum
    check_finite_vector(g_best, "gradient")
    cand_losses = [losses.get(c, frozen[c].estimate if c in frozen else math.nan)
                   for c in range(s)]
    new_state = SpecBgdState(Model(W[best], state.model.iter + 1), g_best)
    return BgdEpochResult(new_state, best, losses[best], 0.0, True, cand_losses,
                          seen, seen / n, tracker.checks_done)


def line_search_baseline(model: Model, task, ds, c1=1e-4, rho=0.5, alpha0=1.0,
                         workers=1, max_backtracks=50):
    """Backtracking search along the descent direction.

    Accepts the first step satisfying the sufficient-decrease condition
    loss(w - a*g) <= loss(w) - c1 * a * ||g||^2.  Returns the stepped
    model, its objective, and how many full data passes were consumed
    (one bundled loss+gradient pass plus one loss pass per trial).
    """
    if not (0.0 < c1 < 1.0 and 0.0 < rho < 1.0 and alpha0 > 0.0):
        raise ConfigError("line search needs c1, rho in (0,1) and alpha0 > 0")
    res = full_pass(ds, task, model.weights[None, :], workers=workers)
    loss0 = float(res.loss_sums[0]) + regularizer_value(task, model)
    g = full_gradient_vec(task, res.grad_sums[0], model)
    check_finite_vector(g, "gradient")
    gnorm2 = float(g @ g)
    passes = 1
    alpha = alpha0
    for _ in range(max_backtracks):
        trial = Model(model.weights - alpha * g, model.iter + 1)
        loss_trial = exact_objective(ds, task, trial, workers=workers)
        passes += 1
        if loss_trial <= loss0 - c1 * alpha * gnorm2:
            return trial, loss_trial, passes
        alpha *= rho
    raise StepFailureError(
        f"no acceptable step within {max_backtracks} backtracking trials")
