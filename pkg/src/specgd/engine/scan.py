"""Chunked scan planning over block-structured datasets.

The engine consumes datasets in chunks of consecutive blocks.  A chunk
is both the unit of vectorized compute and the unit of floating-point
reduction: per-chunk partial sums are folded in scan order, so results
are reproducible and independent of how many workers executed the
chunks.  Scans may begin at any block and wrap; a chunk never spans the
wrap point, keeping in-memory chunks zero-copy slices.
"""

from __future__ import annotations

import numpy as np

from ..data_store import DatasetHandle

DEFAULT_CHUNK_ROWS = 8192


def chunk_block_count(block_size: int, target_rows: int) -> int:
    return max(1, -(-target_rows // block_size))


def plan_chunks(ds: DatasetHandle, start_block: int, chunk_blocks: int) -> list[tuple[int, int]]:
    """Return (first_block, n_blocks) runs covering the dataset once.

    Runs follow scan order from ``start_block`` and wrap at the end of
    the dataset without any run crossing the wrap point.
    """
    nb = ds.n_blocks
    runs = []
    pos = start_block % nb
    remaining = nb
    while remaining > 0:
        take = min(chunk_blocks, nb - pos, remaining)
        runs.append((pos, take))
        remaining -= take
        pos = (pos + take) % nb
    return runs


def chunk_arrays(ds: DatasetHandle, run: tuple[int, int]):
    """Materialize one run of consecutive blocks as (X, y, rows)."""
    first, count = run
    h = ds.header
    lo = first * h.block_size
    hi = min(lo + count * h.block_size, h.n_examples)
    if ds.in_memory:
        return ds._X[lo:hi], ds._y[lo:hi], hi - lo
    xs, ys = [], []
    for b in range(first, first + count):
        X, y = ds.read_block(b)
        xs.append(X)
        ys.append(y)
    if len(xs) == 1:
        return xs[0], ys[0], xs[0].shape[0]
    X = np.vstack(xs)
    y = np.concatenate(ys)
    return X, y, X.shape[0]
