"""Dataset format, generation, conversion, scanning, and partitioning tests."""

import hashlib

import numpy as np
import pytest
from scipy import stats

from specgd import data_store
from specgd.data_store import convert, generate, load, partition
from specgd.errors import ConfigError, DataFormatError, DataIOError
from specgd.task_math import Family, TaskSpec

SVM = TaskSpec(Family.SVM_HINGE)


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_generate_same_seed_byte_identical(tmp_path):
    a = tmp_path / "a.sgd"
    b = tmp_path / "b.sgd"
    generate(500, 6, SVM, noise=0.1, seed=42, out=a)
    generate(500, 6, SVM, noise=0.1, seed=42, out=b)
    assert _digest(a) == _digest(b)
    c = tmp_path / "c.sgd"
    generate(500, 6, SVM, noise=0.1, seed=43, out=c)
    assert _digest(a) != _digest(c)


def test_generate_noise_free_is_separable():
    ds = generate(1000, 10, SVM, noise=0.0, seed=1)
    margins = (ds._X @ ds.ground_truth) * ds._y
    assert np.all(margins > 0)


def test_generate_full_noise_destroys_signal():
    ds = generate(10000, 8, SVM, noise=0.5, seed=9)
    pred = np.where(ds._X @ ds.ground_truth >= 0, 1.0, -1.0)
    acc = np.mean(pred == ds._y)
    assert abs(acc - 0.5) < 0.05


def test_round_trip_bit_exact(tmp_path):
    ds = generate(777, 5, SVM, noise=0.2, seed=3, block_size=100)
    path = tmp_path / "rt.sgd"
    ds.write(path)
    loaded = load(path)
    assert loaded.header == ds.header
    X = np.vstack([x for _, x, _ in loaded.scan_blocks(0)])
    y = np.concatenate([yy for _, _, yy in loaded.scan_blocks(0)])
    assert np.array_equal(X, ds._X)
    assert np.array_equal(y, ds._y)
    mat = loaded.materialize()
    assert np.array_equal(mat._X, ds._X)


def test_scan_yields_every_example_once_any_start():
    ds = generate(250, 3, SVM, noise=0.1, seed=5, block_size=32)
    base = sorted(map(tuple, np.column_stack([ds._X, ds._y])))
    for start in (0, 3, ds.n_blocks - 1):
        rows = [(tuple(e.features) + (e.label,)) for e in ds.scan(start)]
        assert len(rows) == 250
        assert sorted(rows) == base


def test_scan_start_block_bounds():
    ds = generate(100, 2, SVM, noise=0.0, seed=4, block_size=10)
    with pytest.raises(ConfigError):
        list(ds.scan_blocks(10))
    with pytest.raises(ConfigError):
        list(ds.scan_blocks(-1))


def test_scan_prefix_behaves_like_a_random_sample():
    # Mean of feature 0 over a prefix should stay inside the 99% CLT bound
    # of the full-data mean for almost every random start.
    ds = generate(20000, 4, SVM, noise=0.1, seed=8, block_size=64)
    col = ds._X[:, 0]
    full_mean = col.mean()
    n_prefix = 2000
    sd = col.std(ddof=1)
    # without-replacement correction for a fifth of the data
    bound = 2.576 * sd / np.sqrt(n_prefix) * np.sqrt(1 - n_prefix / ds.n)
    rng = np.random.default_rng(123)
    hits = 0
    for _ in range(100):
        start = int(rng.integers(ds.n_blocks))
        vals = []
        for _, X, _ in ds.scan_blocks(start):
            vals.append(X[:, 0])
            if sum(v.size for v in vals) >= n_prefix:
                break
        prefix_mean = np.concatenate(vals)[:n_prefix].mean()
        hits += abs(prefix_mean - full_mean) <= bound
    assert hits >= 96


def test_row_position_uniform_over_seeds():
    # Track where the first source row lands across many shuffle seeds.
    n = 8
    rows = [",".join(["%d" % r] * 3 + ["1"]) for r in range(n)]
    counts = np.zeros(n)
    for seed in range(400):
        ds = convert(rows, "csv", block_size=4, seed=seed)
        pos = int(np.flatnonzero(ds._X[:, 0] == 0.0)[0])
        counts[pos] += 1
    _, p = stats.chisquare(counts)
    assert p > 0.01


def test_convert_csv_basics(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("1.0,2.0,1\n3.0,4.0,-1\n5.0,6.0,1\n")
    ds = convert(src, "csv", block_size=16, seed=0)
    assert ds.n == 3 and ds.dim == 2 and ds.n_blocks == 1
    assert sorted(ds._y) == [-1.0, 1.0, 1.0]


def test_convert_rejects_zero_label():
    with pytest.raises(DataFormatError) as ei:
        convert(["1.0,2.0,1", "3.0,4.0,0"], "csv")
    assert ei.value.details["line"] == 2
    assert "2" in str(ei.value)


def test_convert_rejects_ragged_and_non_numeric():
    with pytest.raises(DataFormatError) as ei:
        convert(["1.0,2.0,1", "3.0,1"], "csv")
    assert ei.value.details["line"] == 2
    with pytest.raises(DataFormatError) as ei:
        convert(["1.0,x,1"], "csv")
    assert ei.value.details["line"] == 1


def test_convert_label_sum_preserved():
    rng = np.random.default_rng(17)
    labels = rng.choice([-1, 1], size=200)
    rows = ["%f,%f,%d" % (rng.normal(), rng.normal(), l) for l in labels]
    ds = convert(rows, "csv", block_size=32, seed=99)
    scanned = sum(e.label for e in ds.scan(2))
    assert scanned == labels.sum()


def test_convert_sparse_text_densifies():
    rows = ["+1 1:2.5 3:1.0", "-1 2:4.0", "+1 1:0.5 2:1.5 3:2.5"]
    ds = convert(rows, "sparse", seed=1)
    assert ds.dim == 3
    dense = {tuple(x): y for x, y in zip(map(tuple, ds._X), ds._y)}
    assert dense[(2.5, 0.0, 1.0)] == 1.0
    assert dense[(0.0, 4.0, 0.0)] == -1.0


def test_convert_sparse_rejects_bad_entries():
    with pytest.raises(DataFormatError):
        convert(["+1 0:2.0"], "sparse")  # indexes are 1-based
    with pytest.raises(DataFormatError):
        convert(["+1 1:abc"], "sparse")


def test_partition_round_robin():
    ds = generate(800, 2, SVM, noise=0.0, seed=2, block_size=100)  # 8 blocks
    p1 = partition(ds, 1)
    assert p1.blocks_of(0) == list(range(8))
    p4 = partition(ds, 4)
    sizes = [len(p4.blocks_of(p)) for p in range(4)]
    assert sizes == [2, 2, 2, 2]
    all_blocks = sorted(b for p in range(4) for b in p4.blocks_of(p))
    assert all_blocks == list(range(8))
    total = sum(ds.header.block_rows(b) for p in range(4) for b in p4.blocks_of(p))
    assert total == ds.n
    with pytest.raises(ConfigError):
        partition(ds, 9)


def test_corrupted_block_detected(tmp_path):
    path = tmp_path / "bad.sgd"
    generate(100, 3, SVM, noise=0.0, seed=6, block_size=25, out=path)
    raw = bytearray(path.read_bytes())
    raw[60] ^= 0xFF  # flip a byte inside the first block payload
    path.write_bytes(bytes(raw))
    ds = load(path)
    with pytest.raises(DataIOError):
        list(ds.scan_blocks(0))


def test_load_missing_and_bad_magic(tmp_path):
    with pytest.raises(DataIOError):
        load(tmp_path / "nope.sgd")
    junk = tmp_path / "junk.sgd"
    junk.write_bytes(b"not a dataset header at all!....")
    with pytest.raises(DataIOError):
        load(junk)


def test_header_field_validation():
    with pytest.raises(ConfigError):
        data_store.DatasetHeader(0, 3, 10, 0)
    with pytest.raises(ConfigError):
        generate(10, 2, SVM, noise=1.5, seed=0)
