"""Accumulator, merge, and confidence-bound tests."""

import numpy as np
import pytest

from specgd.errors import ConfigError, NumericError
from specgd.estimators import (EstimatorAccumulator, VectorAccumulator, merge,
                               report, report_vector, z_value)


def _fold(values):
    acc = EstimatorAccumulator()
    for v in values:
        acc.accumulate(v)
    return acc


def test_accumulate_hand_values():
    acc = EstimatorAccumulator().accumulate(3.0)
    assert (acc.n, acc.sum, acc.sum_sq) == (1, 3.0, 9.0)
    acc.accumulate(-1.0)
    assert (acc.n, acc.sum, acc.sum_sq) == (2, 2.0, 10.0)


def test_accumulate_zeros():
    acc = _fold([0.0] * 17)
    assert (acc.n, acc.sum, acc.sum_sq) == (17, 0.0, 0.0)


def test_accumulate_rejects_non_finite():
    with pytest.raises(NumericError):
        EstimatorAccumulator().accumulate(float("nan"))
    with pytest.raises(NumericError):
        EstimatorAccumulator().accumulate(float("inf"))


def test_merge_identity_and_commutativity():
    a = _fold([1.0, 2.0, 3.5])
    empty = EstimatorAccumulator()
    assert merge(a, empty) == a
    b = _fold([-4.0, 0.25])
    assert merge(a, b) == merge(b, a)


def test_merge_of_partitions_equals_single_pass():
    # Integer-valued floats sum without rounding, so the per-partition fold
    # must match the single pass bit for bit.
    rng = np.random.default_rng(0)
    values = rng.integers(-1000, 1000, size=1000).astype(float)
    whole = _fold(values)
    parts = [_fold(values[i::4]) for i in range(4)]
    folded = parts[0]
    for p in parts[1:]:
        folded = merge(folded, p)
    assert folded == whole


def test_report_hand_example():
    # sample {0, 2} from a population of 4 at 95%
    r = report(_fold([0.0, 2.0]), population=4)
    assert r.estimate == 4.0
    assert r.half_width == pytest.approx(5.5436231, abs=1e-5)
    assert r.n_seen == 2 and r.population == 4


def test_report_zero_variance_sample():
    r = report(_fold([1.0, 1.0, 1.0]), population=6)
    assert r.estimate == 6.0
    assert r.half_width == 0.0


def test_report_full_scan_is_exact():
    rng = np.random.default_rng(1)
    values = rng.standard_normal(10000)
    acc = _fold(values)
    direct = 0.0
    for v in values:  # the same left-to-right reduction order
        direct += v
    r = report(acc, population=values.size)
    assert r.estimate == direct
    assert r.half_width == 0.0


def test_report_guards():
    with pytest.raises(ConfigError):
        report(EstimatorAccumulator(), population=5)
    with pytest.raises(ConfigError):
        report(_fold([1.0, 2.0]), population=1)
    with pytest.raises(ConfigError):
        report(_fold([1.0]), population=2, confidence=1.5)


def test_z_value_at_95():
    assert z_value(0.95) == pytest.approx(1.959964, abs=1e-6)


def _prefix_acc(values, start, n):
    idx = (np.arange(n) + start) % values.size
    acc = EstimatorAccumulator()
    acc.accumulate_block(values[idx])
    return acc


def test_estimator_is_unbiased_over_random_prefixes():
    rng = np.random.default_rng(2)
    values = rng.standard_normal(5000) + 0.3
    exact = values.sum()
    n = 500
    ests = []
    for _ in range(2000):
        start = int(rng.integers(values.size))
        ests.append(report(_prefix_acc(values, start, n), values.size).estimate)
    ests = np.asarray(ests)
    sem = ests.std(ddof=1) / np.sqrt(ests.size)
    assert abs(ests.mean() - exact) < 3 * sem


def test_coverage_near_nominal():
    rng = np.random.default_rng(3)
    values = np.abs(rng.standard_normal(4000)) + 0.1
    exact = values.sum()
    n = 400
    hits = 0
    trials = 1000
    for _ in range(trials):
        start = int(rng.integers(values.size))
        r = report(_prefix_acc(values, start, n), values.size)
        hits += abs(r.estimate - exact) <= r.half_width
    assert 0.92 <= hits / trials <= 0.98


def test_half_width_shrinks_with_sample_size():
    rng = np.random.default_rng(4)
    values = rng.standard_normal(4000)
    widths_small, widths_big = [], []
    for _ in range(200):
        start = int(rng.integers(values.size))
        widths_small.append(report(_prefix_acc(values, start, 200), values.size).half_width)
        widths_big.append(report(_prefix_acc(values, start, 400), values.size).half_width)
    assert np.mean(widths_small) > np.mean(widths_big)


def test_vector_accumulator_matches_scalar_per_dimension():
    rng = np.random.default_rng(5)
    rows = rng.standard_normal((300, 4))
    vec = VectorAccumulator(dim=4)
    vec.accumulate_partials(rows.shape[0], rows.sum(axis=0), (rows ** 2).sum(axis=0))
    gv = report_vector(vec, population=900)
    for j in range(4):
        acc = EstimatorAccumulator(rows.shape[0], float(rows[:, j].sum()),
                                   float((rows[:, j] ** 2).sum()))
        rj = report(acc, population=900)
        assert gv.component(j).estimate == pytest.approx(rj.estimate, rel=1e-12)
        assert gv.component(j).half_width == pytest.approx(rj.half_width, rel=1e-12)


def test_vector_accumulator_merge():
    rng = np.random.default_rng(6)
    rows = rng.standard_normal((100, 3))
    whole = VectorAccumulator(dim=3)
    whole.accumulate_partials(100, rows.sum(axis=0), (rows ** 2).sum(axis=0))
    a = VectorAccumulator(dim=3)
    a.accumulate_partials(60, rows[:60].sum(axis=0), (rows[:60] ** 2).sum(axis=0))
    b = VectorAccumulator(dim=3)
    b.accumulate_partials(40, rows[60:].sum(axis=0), (rows[60:] ** 2).sum(axis=0))
    a.merge_from(b)
    assert a.n == whole.n
    np.testing.assert_allclose(a.sum, whole.sum, rtol=1e-12)
    np.testing.assert_allclose(a.sum_sq, whole.sum_sq, rtol=1e-12)
