"""Block-structured binary dataset storage with load-time randomization.

Examples are written in a uniformly random permutation fixed when the
dataset is created, so a sequential scan that begins at a random block
yields a simple random sample (at block granularity) in any prefix.

On-disk layout, little-endian:

    header : magic "SGD1" | u32 version=1 | u64 n_examples | u32 dim
             | u32 block_size | u64 shuffle_seed        (32 bytes)
    block  : u32 count | count rows of (dim x f64 features, f64 label)
             | u32 crc32 over the preceding count+rows bytes

Datasets can also live entirely in memory (same logical block structure)
for benchmark workloads; `materialize()` converts a file-backed handle.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigError, DataFormatError, DataIOError
from .task_math import Example, TaskSpec

MAGIC = b"SGD1"
VERSION = 1
DEFAULT_BLOCK_SIZE = 1024
_HEADER = struct.Struct("<4sIQIIQ")


@dataclass(frozen=True)
class DatasetHeader:
    n_examples: int
    dim: int
    block_size: int
    shuffle_seed: int
    version: int = VERSION

    def __post_init__(self):
        if self.n_examples < 1 or self.dim < 1 or self.block_size < 1:
            raise ConfigError("n_examples, dim and block_size must all be >= 1")

    @property
    def n_blocks(self) -> int:
        return -(-self.n_examples // self.block_size)

    def block_rows(self, b: int) -> int:
        if b == self.n_blocks - 1:
            return self.n_examples - b * self.block_size
        return self.block_size

    def pack(self) -> bytes:
        return _HEADER.pack(
            MAGIC, self.version, self.n_examples, self.dim, self.block_size, self.shuffle_seed
        )

    @classmethod
    def unpack(cls, raw: bytes) -> "DatasetHeader":
        magic, version, n, d, bs, seed = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise DataIOError("not a dataset file (bad magic)")
        if version != VERSION:
            raise DataIOError(f"unsupported dataset version {version}")
        return cls(n, d, bs, seed, version)


@dataclass(frozen=True)
class PartitionSet:
    """Round-robin assignment of blocks to workers."""

    m_partitions: int
    assignment: tuple  # block index -> partition index

    def blocks_of(self, p: int) -> list[int]:
        return [b for b, owner in enumerate(self.assignment) if owner == p]


class DatasetHandle:
    """Immutable view of a stored dataset, file-backed or in-memory."""

    def __init__(self, header: DatasetHeader, path: Optional[Path] = None,
                 features: Optional[np.ndarray] = None, labels: Optional[np.ndarray] = None,
                 ground_truth: Optional[np.ndarray] = None):
        if path is None and features is None:
            raise ConfigError("dataset handle needs a path or in-memory arrays")
        self.header = header
        self.path = Path(path) if path is not None else None
        self._X = features
        self._y = labels
        # Hidden generating model, only populated by generate(); never stored.
        self.ground_truth = ground_truth

    @property
    def n(self) -> int:
        return self.header.n_examples

    @property
    def dim(self) -> int:
        return self.header.dim

    @property
    def n_blocks(self) -> int:
        return self.header.n_blocks

    @property
    def in_memory(self) -> bool:
        return self._X is not None

    # -- block access -------------------------------------------------------

    def _block_offset(self, b: int) -> int:
        h = self.header
        # Every block before b is full-sized; only the last block is short.
        rows_before = b * h.block_size
        return _HEADER.size + b * (4 + 4) + rows_before * (h.dim + 1) * 8

    def read_block(self, b: int):
        """Return (X, y) arrays for block b, verifying the checksum."""
        h = self.header
        rows = h.block_rows(b)
        if self.in_memory:
            lo = b * h.block_size
            return self._X[lo:lo + rows], self._y[lo:lo + rows]
        try:
            with open(self.path, "rb") as f:
                f.seek(self._block_offset(b))
                raw = f.read(4 + rows * (h.dim + 1) * 8 + 4)
        except OSError as e:
            raise DataIOError(f"cannot read dataset block {b}: {e}") from e
        if len(raw) != 4 + rows * (h.dim + 1) * 8 + 4:
            raise DataIOError(f"dataset block {b} is truncated")
        (count,) = struct.unpack_from("<I", raw, 0)
        if count != rows:
            raise DataIOError(f"dataset block {b} has inconsistent row count")
        (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
        if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
            raise DataIOError(f"dataset block {b} failed its checksum")
        flat = np.frombuffer(raw, dtype="<f8", count=rows * (h.dim + 1), offset=4)
        mat = flat.reshape(rows, h.dim + 1)
        return np.ascontiguousarray(mat[:, : h.dim]), np.ascontiguousarray(mat[:, h.dim])

    def scan_blocks(self, start_block: int = 0) -> Iterator[tuple]:
        """Yield (block_index, X, y) for all blocks, wrapping at the end."""
        nb = self.n_blocks
        if not 0 <= start_block < nb:
            raise ConfigError(f"start_block {start_block} outside [0, {nb})")
        for k in range(nb):
            b = (start_block + k) % nb
            X, y = self.read_block(b)
            yield b, X, y

    def scan(self, start_block: int = 0) -> Iterator[Example]:
        """Yield every example exactly once, in block order from start_block."""
        for _, X, y in self.scan_blocks(start_block):
            for i in range(X.shape[0]):
                yield Example(X[i], float(y[i]))

    def materialize(self) -> "DatasetHandle":
        """Load the whole dataset into memory (no-op if already there)."""
        if self.in_memory:
            return self
        X = np.empty((self.n, self.dim))
        y = np.empty(self.n)
        pos = 0
        for _, bx, by in self.scan_blocks(0):
            X[pos:pos + bx.shape[0]] = bx
            y[pos:pos + by.shape[0]] = by
            pos += bx.shape[0]
        return DatasetHandle(self.header, path=self.path, features=X, labels=y,
                             ground_truth=self.ground_truth)

    def write(self, path) -> "DatasetHandle":
        """Serialize to the binary format; returns a file-backed handle."""
        if not self.in_memory:
            raise ConfigError("only in-memory handles can be written")
        path = Path(path)
        h = self.header
        try:
            with open(path, "wb") as f:
                f.write(h.pack())
                for b in range(h.n_blocks):
                    lo = b * h.block_size
                    rows = h.block_rows(b)
                    mat = np.empty((rows, h.dim + 1))
                    mat[:, : h.dim] = self._X[lo:lo + rows]
                    mat[:, h.dim] = self._y[lo:lo + rows]
                    payload = struct.pack("<I", rows) + mat.astype("<f8").tobytes()
                    f.write(payload)
                    f.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
        except OSError as e:
            raise DataIOError(f"cannot write dataset to {path}: {e}") from e
        return DatasetHandle(h, path=path, features=self._X, labels=self._y,
                             ground_truth=self.ground_truth)


def load(path) -> DatasetHandle:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            header = DatasetHeader.unpack(f.read(_HEADER.size))
    except FileNotFoundError as e:
        raise DataIOError(f"dataset file not found: {path}") from e
    except OSError as e:
        raise DataIOError(f"cannot open dataset {path}: {e}") from e
    except struct.error as e:
        raise DataIOError(f"dataset header truncated in {path}") from e
    return DatasetHandle(header, path=path)


def _build_handle(X, y, block_size, seed, rng, ground_truth=None) -> DatasetHandle:
    """Shuffle rows with a permutation drawn from rng and wrap them."""
    n = X.shape[0]
    perm = rng.permutation(n)
    header = DatasetHeader(n_examples=n, dim=X.shape[1], block_size=block_size,
                           shuffle_seed=seed & 0xFFFFFFFFFFFFFFFF)
    return DatasetHandle(header, features=np.ascontiguousarray(X[perm]),
                         labels=np.ascontiguousarray(y[perm]), ground_truth=ground_truth)


def generate(n: int, d: int, task: TaskSpec, noise: float, seed: int,
             block_size: int = DEFAULT_BLOCK_SIZE, out=None) -> DatasetHandle:
    """Create a synthetic linearly-separable-plus-noise classification set.

    A hidden model w* is drawn, features are standard normal, labels are
    sign(w* . x) with each label flipped independently with probability
    ``noise``.  Row order is a fresh uniform permutation.  When ``out`` is
    given the dataset is also written to disk.
    """
    if n < 1 or d < 1:
        raise ConfigError("generate needs n >= 1 and d >= 1")
    if not 0.0 <= noise <= 1.0:
        raise ConfigError("noise must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    w_star = rng.standard_normal(d)
    X = rng.standard_normal((n, d))
    y = np.where(X @ w_star >= 0.0, 1.0, -1.0)
    flips = rng.random(n) < noise
    y[flips] *= -1.0
    handle = _build_handle(X, y, block_size, seed, rng, ground_truth=w_star)
    if out is not None:
        handle = handle.write(out)
    return handle


def _parse_label(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise DataFormatError(f"line {lineno}: label {tok!r} is not numeric", line=lineno)
    if v not in (1.0, -1.0):
        raise DataFormatError(f"line {lineno}: label must be -1 or +1, got {tok!r}", line=lineno)
    return v


def _parse_csv(lines) -> tuple:
    rows, labels = [], []
    d = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        toks = line.split(",")
        if d is None:
            d = len(toks) - 1
            if d < 1:
                raise DataFormatError(f"line {lineno}: need at least one feature column",
                                      line=lineno)
        if len(toks) != d + 1:
            raise DataFormatError(
                f"line {lineno}: expected {d + 1} fields, got {len(toks)}", line=lineno)
        try:
            feats = [float(t) for t in toks[:d]]
        except ValueError:
            raise DataFormatError(f"line {lineno}: non-numeric feature field", line=lineno)
        rows.append(feats)
        labels.append(_parse_label(toks[d], lineno))
    if not rows:
        raise DataFormatError("input has no data rows", line=0)
    return np.asarray(rows), np.asarray(labels)


def _parse_sparse(lines) -> tuple:
    """SVMlight-style rows: 'label idx:val ...' with 1-based indices."""
    entries, labels = [], []
    d = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        toks = line.split()
        label = _parse_label(toks[0], lineno)
        pairs = []
        for tok in toks[1:]:
            idx, _, val = tok.partition(":")
            try:
                i = int(idx)
                v = float(val)
            except ValueError:
                raise DataFormatError(f"line {lineno}: bad feature entry {tok!r}", line=lineno)
            if i < 1:
                raise DataFormatError(f"line {lineno}: feature indexes are 1-based", line=lineno)
            d = max(d, i)
            pairs.append((i - 1, v))
        entries.append(pairs)
        labels.append(label)
    if not entries:
        raise DataFormatError("input has no data rows", line=0)
    X = np.zeros((len(entries), max(d, 1)))
    for r, pairs in enumerate(entries):
        for i, v in pairs:
            X[r, i] = v
    return X, np.asarray(labels)


def convert(text_source, fmt: str, block_size: int = DEFAULT_BLOCK_SIZE,
            seed: int = 0, out=None) -> DatasetHandle:
    """Parse a CSV or sparse text file into the binary format.

    Rows are shuffled with a Fisher-Yates permutation seeded by ``seed``.
    Parse errors name the offending 1-based line number.
    """
    if isinstance(text_source, (str, Path)):
        try:
            with open(text_source, "r") as f:
                lines = f.readlines()
        except OSError as e:
            raise DataIOError(f"cannot read {text_source}: {e}") from e
    else:
        lines = list(text_source)
    fmt = fmt.lower()
    if fmt == "csv":
        X, y = _parse_csv(lines)
    elif fmt in ("sparse", "sparse_text"):
        X, y = _parse_sparse(lines)
    else:
        raise ConfigError(f"unknown input format {fmt!r}")
    handle = _build_handle(X, y, block_size, seed, np.random.default_rng(seed))
    if out is not None:
        handle = handle.write(out)
    return handle


def partition(ds: DatasetHandle, m: int) -> PartitionSet:
    """Assign blocks round-robin to m workers; sizes differ by at most one."""
    if m < 1:
        raise ConfigError("partition count must be >= 1")
    if m > ds.n_blocks:
        raise ConfigError(
            f"cannot split {ds.n_blocks} blocks across {m} partitions")
    return PartitionSet(m, tuple(b % m for b in range(ds.n_blocks)))
