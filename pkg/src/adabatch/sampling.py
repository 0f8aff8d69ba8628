"""The four mini-batch sampling distributions and their unbiased weights.

Every strategy carries a Partitioning; the plain `nice`/`independent`
variants wrap a single partition covering all indices. A draw is a realized
index set S plus weights v_i chosen so that E[v_i * 1{i in S}] = 1:

    nice                  v_i = n / tau
    independent           v_i = 1 / p_i
    partition_nice        v_i = n_Cj / (q_Cj tau)
    partition_independent v_i = 1 / (q_Cj p_i)

The stochastic gradient (1/n) sum_{i in S} v_i grad f_i(x) is then unbiased
for grad f(x); `enumerate_draws` walks the full support exactly for small
instances and backs every expectation formula in the test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from math import comb

import numpy as np

from .data import Partitioning, single_partition
from . import kernels

VARIANTS = ("nice", "independent", "partition_nice", "partition_independent")
ENUMERATION_BOUND = 10 ** 6


class EnumerationBoundError(ValueError):
    """Support too large to enumerate; fall back to Monte Carlo sampling."""


@dataclass(frozen=True)
class SamplingStrategy:
    variant: str
    tau: int
    partitioning: Partitioning
    p: np.ndarray | None = None  # explicit inclusion probabilities (independent variants)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        part = self.partitioning
        if self.variant in ("nice", "independent") and part.K != 1:
            raise ValueError(f"{self.variant} sampling requires a single partition")
        if not 1 <= self.tau <= part.min_size:
            raise ValueError(f"tau={self.tau} outside [1, {part.min_size}]")
        if self.is_nice and self.variant == "partition_nice" and part.min_size < 2:
            raise ValueError("partition-nice sampling needs every partition size >= 2")
        if self.p is not None:
            if self.variant in ("nice", "partition_nice"):
                raise ValueError("inclusion probabilities only apply to independent variants")
            p = np.asarray(self.p, dtype=np.float64)
            object.__setattr__(self, "p", p)
            if len(p) != part.n or np.any(p <= 0) or np.any(p > 1):
                raise ValueError("need p_i in (0, 1] for every index")
            for j, m in enumerate(part.members):
                if abs(p[m].sum() - self.tau) > 1e-12:
                    raise ValueError(f"sum of p_i over partition {j} is {p[m].sum()!r}, expected tau={self.tau}")

    @property
    def is_nice(self):
        return self.variant in ("nice", "partition_nice")

    @property
    def n(self):
        return self.partitioning.n

    def probs(self):
        """Effective inclusion probabilities (default rule p_i = tau/n_Cj)."""
        if self.p is not None:
            return self.p
        part = self.partitioning
        p = np.empty(part.n)
        for j, m in enumerate(part.members):
            p[m] = self.tau / part.sizes[j]
        return p

    def with_tau(self, tau):
        """Same family at a different batch size (default-p only)."""
        if self.p is not None and tau != self.tau:
            raise ValueError("explicit inclusion probabilities pin tau")
        return replace(self, tau=int(tau))

    def weight_nice(self, j):
        part = self.partitioning
        return part.sizes[j] / (part.q[j] * self.tau)


def make_strategy(variant, tau, n=None, partitioning=None, p=None) -> SamplingStrategy:
    """Convenience constructor; builds the single-partition wrapper for the
    plain variants when only n is given."""
    if partitioning is None:
        if n is None:
            raise ValueError("need n or a partitioning")
        partitioning = single_partition(n)
    if variant in ("nice", "independent") and partitioning.K != 1:
        raise ValueError(f"{variant} sampling requires a single partition")
    return SamplingStrategy(variant, int(tau), partitioning, p)


@dataclass
class SampleDraw:
    indices: np.ndarray  # realized set S (int64)
    weights: np.ndarray  # v_i for i in S

    @property
    def size(self):
        return len(self.indices)


def _pick_partition(part: Partitioning, rng) -> int:
    # one uniform consumed iff K > 1, so single-partition streams stay lean
    if part.K == 1:
        return 0
    return min(int(np.searchsorted(part.q_cum, rng.random(), side="right")), part.K - 1)


def draw(strategy: SamplingStrategy, rng) -> SampleDraw:
    """One realized batch under the strategy's law, using `rng`'s stream."""
    part = strategy.partitioning
    j = _pick_partition(part, rng)
    members = part.members[j]
    if strategy.is_nice:
        tau = strategy.tau
        perm = members.copy()
        kernels.partial_shuffle(perm, tau, rng.random(tau))
        idx = np.sort(perm[:tau])
        w = np.full(tau, strategy.weight_nice(j))
        return SampleDraw(idx, w)
    p = strategy.probs()[members]
    keep = rng.random(len(members)) < p
    idx = members[keep]
    w = 1.0 / (part.q[j] * p[keep])
    order = np.argsort(idx)
    return SampleDraw(idx[order], w[order])


def stochastic_gradient(obj, d: SampleDraw, x):
    """g = (1/n) sum_{i in S} v_i grad f_i(x); empty draws give the zero vector."""
    indptr, indices, values, labels, kind, lam = obj.arrays()
    x = np.ascontiguousarray(x, dtype=np.float64)
    return kernels.grad_batch(indptr, indices, values, labels, kind, lam, x,
                              d.indices, d.weights / obj.n)


def enumerate_draws(strategy: SamplingStrategy):
    """Complete support as (SampleDraw, probability) pairs, probabilities
    summing to 1. Feasible only within the enumeration bound (combinations
    for nice variants, 2^{n_Cj} for independent ones)."""
    part = strategy.partitioning
    if strategy.is_nice:
        total = sum(comb(int(sz), strategy.tau) for sz in part.sizes)
    else:
        total = sum(2 ** int(sz) for sz in part.sizes)
    if total > ENUMERATION_BOUND:
        raise EnumerationBoundError(
            f"support size {total} exceeds {ENUMERATION_BOUND}; use Monte Carlo draws instead")
    out = []
    if strategy.is_nice:
        for j, m in enumerate(part.members):
            prob = part.q[j] / comb(len(m), strategy.tau)
            w = strategy.weight_nice(j)
            for sub in itertools.combinations(m.tolist(), strategy.tau):
                idx = np.array(sub, dtype=np.int64)
                out.append((SampleDraw(idx, np.full(len(idx), w)), prob))
    else:
        p_all = strategy.probs()
        for j, m in enumerate(part.members):
            p = p_all[m]
            for bits in itertools.product((False, True), repeat=len(m)):
                keep = np.array(bits)
                prob = part.q[j] * float(np.prod(np.where(keep, p, 1.0 - p)))
                if prob == 0.0:
                    continue
                idx = m[keep]
                w = 1.0 / (part.q[j] * p[keep])
                out.append((SampleDraw(idx, w), prob))
    return out


def expected_cardinality(strategy: SamplingStrategy) -> float:
    """E|S|; equals tau for all four variants (with default p for independent)."""
    if strategy.is_nice:
        return float(strategy.tau)
    part = strategy.partitioning
    p = strategy.probs()
    return float(sum(part.q[j] * p[m].sum() for j, m in enumerate(part.members)))
