"""LIBSVM-format datasets, row normalization, index partitionings, and
synthetic strongly convex instances.

Datasets are stored CSR-style (indptr/indices/values) with 0-based feature
indices; LIBSVM files on disk use the conventional 1-based indices.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class ParseError(ValueError):
    """Malformed LIBSVM input; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass
class Dataset:
    """Sparse rows a_i and labels b_i of a finite-sum problem.

    Invariants: n >= 1, d >= 1, every index in [0, d), indices strictly
    increasing within each row, len(labels) == n.
    """

    indptr: np.ndarray   # int64, shape (n+1,)
    indices: np.ndarray  # int64, nnz
    values: np.ndarray   # float64, nnz
    labels: np.ndarray   # float64, shape (n,)
    d: int

    def __post_init__(self):
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        if self.n < 1:
            raise ValueError("dataset needs at least one example")
        if self.d < 1:
            raise ValueError("feature dimension must be >= 1")
        if len(self.indptr) != self.n + 1 or self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise ValueError("inconsistent indptr")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= self.d):
            raise ValueError("feature index out of range")
        # strictly increasing indices within each row (no duplicates)
        if len(self.indices) > 1:
            diffs = np.diff(self.indices)
            row_starts = self.indptr[1:-1] - 1  # positions where a new row begins
            interior = np.ones(len(diffs), dtype=bool)
            interior[row_starts[(row_starts >= 0) & (row_starts < len(diffs))]] = False
            if np.any(diffs[interior] <= 0):
                raise ValueError("indices within a row must be strictly increasing")

    @property
    def n(self):
        return len(self.labels)

    def row(self, i):
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.indices[s:e], self.values[s:e]

    def row_norms_sq(self):
        sq = np.zeros(self.n)
        row_of = np.repeat(np.arange(self.n), np.diff(self.indptr))
        np.add.at(sq, row_of, self.values ** 2)
        return sq

    def to_csr(self):
        from scipy.sparse import csr_matrix
        return csr_matrix((self.values, self.indices, self.indptr), shape=(self.n, self.d))

    def to_libsvm(self):
        """Serialize to LIBSVM text (1-based indices, round-trip exact)."""
        lines = []
        for i in range(self.n):
            idx, val = self.row(i)
            feats = " ".join(f"{j + 1}:{v:.17g}" for j, v in zip(idx, val))
            lines.append(f"{self.labels[i]:.17g} {feats}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_rows(cls, rows, labels, d=None):
        """Build from a list of (index_array, value_array) pairs."""
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        idx_parts, val_parts = [], []
        max_idx = -1
        for i, (idx, val) in enumerate(rows):
            idx = np.asarray(idx, dtype=np.int64)
            val = np.asarray(val, dtype=np.float64)
            indptr[i + 1] = indptr[i] + len(idx)
            idx_parts.append(idx)
            val_parts.append(val)
            if len(idx):
                max_idx = max(max_idx, int(idx.max()))
        if d is None:
            d = max(max_idx + 1, 1)
        indices = np.concatenate(idx_parts) if idx_parts else np.zeros(0, dtype=np.int64)
        values = np.concatenate(val_parts) if val_parts else np.zeros(0)
        return cls(indptr, indices, values, np.asarray(labels, dtype=np.float64), d)


def parse_libsvm(source, d=None):
    """Parse LIBSVM text: `<label> <idx>:<val> ...` per line, 1-based indices.

    `source` is a string or a readable text stream. Blank lines are skipped
    and `#` starts a comment. `d` overrides the inferred feature dimension
    (default: the maximum index seen).
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    rows, labels = [], []
    max_idx = -1
    for lineno, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"invalid label {tokens[0]!r}", lineno) from None
        idx, val = [], []
        prev = 0
        for tok in tokens[1:]:
            head, sep, tail = tok.partition(":")
            if not sep:
                raise ParseError(f"invalid feature token {tok!r}", lineno)
            try:
                j = int(head)
                v = float(tail)
            except ValueError:
                raise ParseError(f"invalid feature token {tok!r}", lineno) from None
            if j < 1:
                raise ParseError(f"feature index {j} must be >= 1", lineno)
            if j <= prev:
                raise ParseError(f"non-increasing index {j} after {prev}", lineno)
            prev = j
            idx.append(j - 1)
            val.append(v)
        if idx:
            max_idx = max(max_idx, idx[-1])
        rows.append((np.array(idx, dtype=np.int64), np.array(val)))
        labels.append(label)
    if not rows:
        raise ParseError("empty file: no data lines")
    if d is not None and d < max_idx + 1:
        raise ParseError(f"dimension override {d} < max index {max_idx + 1}")
    return Dataset.from_rows(rows, labels, d=d if d is not None else max(max_idx + 1, 1))


def load_libsvm(path, d=None):
    with open(path, "r", encoding="utf-8") as f:
        return parse_libsvm(f, d=d)


def normalize_rows(ds: Dataset) -> Dataset:
    """Scale every nonzero row to unit Euclidean norm; zero rows untouched."""
    norms = np.sqrt(ds.row_norms_sq())
    scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    row_of = np.repeat(np.arange(ds.n), np.diff(ds.indptr))
    return Dataset(ds.indptr.copy(), ds.indices.copy(), ds.values * scale[row_of],
                   ds.labels.copy(), ds.d)


@dataclass
class Partitioning:
    """Disjoint cover of {0..n-1} with selection probabilities q_j.

    e_j = q_j * (size_j - 1) is the recurring denominator of the
    partition-nice formulas.
    """

    members: list            # K int64 arrays
    q: np.ndarray            # (K,)
    n: int
    sizes: np.ndarray = field(init=False)
    e: np.ndarray = field(init=False)
    part_of: np.ndarray = field(init=False)  # (n,) index -> partition id

    def __post_init__(self):
        self.members = [np.ascontiguousarray(m, dtype=np.int64) for m in self.members]
        self.q = np.asarray(self.q, dtype=np.float64)
        self.sizes = np.array([len(m) for m in self.members], dtype=np.int64)
        if self.sizes.min() < 1:
            raise ValueError("every partition needs at least one element")
        if len(self.q) != len(self.members):
            raise ValueError("q length must match the number of partitions")
        if np.any(self.q <= 0):
            raise ValueError("every q_j must be positive")
        if abs(self.q.sum() - 1.0) > 1e-12:
            raise ValueError(f"partition probabilities sum to {self.q.sum()!r}, not 1")
        flat = np.concatenate(self.members)
        if len(flat) != self.n or len(np.unique(flat)) != self.n or flat.min() != 0 or flat.max() != self.n - 1:
            raise ValueError("partitions must disjointly cover 0..n-1")
        self.e = self.q * (self.sizes - 1)
        self.q_cum = np.cumsum(self.q)
        self.part_of = np.empty(self.n, dtype=np.int64)
        for j, m in enumerate(self.members):
            self.part_of[m] = j

    @property
    def K(self):
        return len(self.members)

    @property
    def min_size(self):
        return int(self.sizes.min())


def make_partitioning(n, k=None, sizes=None, q=None, shuffle_seed=None) -> Partitioning:
    """Split {0..n-1} into partitions.

    Either `k` contiguous near-equal blocks (sizes differ by at most 1) or an
    explicit `sizes` list summing to n. Default q_j = size_j / n. With
    `shuffle_seed`, indices are assigned from a seeded permutation instead of
    contiguously (heterogeneity experiments).
    """
    if (k is None) == (sizes is None):
        raise ValueError("specify exactly one of k or sizes")
    if k is not None:
        if not 1 <= k <= n:
            raise ValueError(f"k must be in [1, {n}], got {k}")
        base, rem = divmod(n, k)
        sizes = [base + 1] * rem + [base] * (k - rem)
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.sum() != n:
        raise ValueError(f"partition sizes sum to {sizes.sum()}, expected {n}")
    if np.any(sizes < 1):
        raise ValueError("every partition size must be >= 1")
    order = np.arange(n, dtype=np.int64)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(n).astype(np.int64)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    members = [order[bounds[j]:bounds[j + 1]] for j in range(len(sizes))]
    if q is None:
        q = sizes / n
    return Partitioning(members, q, n)


def single_partition(n) -> Partitioning:
    return make_partitioning(n, k=1)


def make_synthetic(n, d, seed, noise=0.0, density=1.0, normalize=True, x_scale=1.0):
    """Synthetic ridge-style instance with controllable gradient noise at the
    solution: b_i = a_i . x_gen + noise * N(0,1) with x_gen ~ x_scale * N(0, I).
    noise=0 gives interpolation (up to the regularizer). Returns (Dataset, x_gen).
    """
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, d))
    if density < 1.0:
        mask = rng.random((n, d)) < density
        for i in range(n):
            if not mask[i].any():
                mask[i, rng.integers(d)] = True
        dense = np.where(mask, dense, 0.0)
    if normalize:
        norms = np.linalg.norm(dense, axis=1)
        dense /= np.where(norms > 0, norms, 1.0)[:, None]
    x_gen = x_scale * rng.standard_normal(d)
    b = dense @ x_gen
    if noise > 0:
        b = b + noise * rng.standard_normal(n)
    rows = []
    for i in range(n):
        nz = np.flatnonzero(dense[i])
        rows.append((nz.astype(np.int64), dense[i, nz]))
    return Dataset.from_rows(rows, b, d=d), x_gen
