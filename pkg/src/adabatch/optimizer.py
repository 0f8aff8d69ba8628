"""Adaptive batch-size SGD and its fixed-batch baseline.

The adaptive loop re-estimates the optimal batch size every iteration from
lazily tracked component gradients: after each step the gradients computed
for the sampled rows are stored, their squared norms h_i refreshed, and the
partition sums updated incrementally (with a periodic full recomputation to
bound float drift). The step size follows

    gamma^k = 1/2 min(1 / L(tau^k), eps*mu / min(C, 2 sigma^k))

with the variance cap C optional (0 = disabled, as in all of the paper-style
experiments); when enabled, every gamma^k provably stays inside
[gamma_min, gamma_max] and the run asserts it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .data import Partitioning
from .objectives import Objective, SmoothnessProfile, smoothness_profile
from .sampling import SampleDraw, SamplingStrategy, make_strategy
from .theory import NoiseAggregates, expected_smoothness, gradient_noise, optimal_tau, step_size


class DivergenceError(RuntimeError):
    """Iterate became non-finite; carries the trace up to the failure."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class GradientTracker:
    """Last computed gradient per component, its squared norm h_i, and the
    per-partition gradient sums, maintained incrementally."""

    def __init__(self, obj: Objective, part: Partitioning, x0):
        self.obj = obj
        self.part = part
        n, d, K = obj.n, obj.d, part.K
        self.stored = np.zeros((n, d))
        self.h = np.zeros(n)
        self.part_sums = np.zeros((K, d))
        self.sum_h = np.zeros(K)
        self.refresh(x0)

    def refresh(self, x):
        """Full pass: recompute every stored gradient and all aggregates at x."""
        indptr, indices, values, labels, kind, lam = self.obj.arrays()
        kernels.tracker_refresh(indptr, indices, values, labels, kind, lam,
                                np.ascontiguousarray(x, dtype=np.float64),
                                self.stored, self.h, self.part.part_of,
                                self.part_sums, self.sum_h)

    def lazy_update(self, draw: SampleDraw, x):
        """Refresh the tracked gradients at the drawn rows only."""
        indptr, indices, values, labels, kind, lam = self.obj.arrays()
        kernels.tracker_update(indptr, indices, values, labels, kind, lam,
                               np.ascontiguousarray(x, dtype=np.float64), draw.indices,
                               self.stored, self.h, self.part.part_of,
                               self.part_sums, self.sum_h)

    def aggregates(self) -> NoiseAggregates:
        sizes = self.part.sizes
        means = self.part_sums / sizes[:, None]
        h_Cj = np.einsum("ij,ij->i", means, means)
        hbar_Cj = self.sum_h / sizes
        return NoiseAggregates(h=self.h, h_Cj=np.minimum(h_Cj, hbar_Cj),
                               hbar_Cj=hbar_Cj, hbar=float(self.h.sum() / self.part.n))

    def drift(self):
        """Max |incremental - recomputed| over the maintained aggregates."""
        ps = np.zeros_like(self.part_sums)
        sh = np.zeros_like(self.sum_h)
        for j, m in enumerate(self.part.members):
            ps[j] = self.stored[m].sum(axis=0)
            sh[j] = self.h[m].sum()
        d1 = float(np.abs(self.part_sums - ps).max())
        d2 = float(np.abs(self.sum_h - sh).max())
        d3 = float(np.abs(self.h - np.einsum("ij,ij->i", self.stored, self.stored)).max())
        return max(d1, d2, d3)


def init_tracker(obj: Objective, part: Partitioning, x0) -> GradientTracker:
    return GradientTracker(obj, part, x0)


@dataclass
class RunConfig:
    epsilon: float
    cap: float = 0.0              # variance cap C; 0 disables it
    seed: int = 0
    max_epochs: float = 50.0
    target_rel_error: float | None = None  # default eps/10
    trace_every: int = 1
    x0: np.ndarray | None = None
    max_iters: int | None = None
    tracker_refresh_epochs: float = 10.0
    record: bool = False          # keep (x^k, S^k) history for replay checks

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_epochs <= 0:
            raise ValueError("max_epochs must be positive")

    @property
    def target(self):
        return self.epsilon / 10.0 if self.target_rel_error is None else self.target_rel_error


@dataclass
class TraceRecord:
    iter: int
    epochs: float
    rel_error: float
    tau: int
    gamma: float
    sigma: float
    L: float


@dataclass
class RunResult:
    trace: list
    x_final: np.ndarray
    iterations: int
    epochs: float
    epochs_to_target: float | None
    gamma_min: float
    gamma_max: float
    stop_reason: str
    history: list | None = None          # recorded (rows, x_before) per iteration
    refresh_iters: list = field(default_factory=list)

    @property
    def reached_target(self):
        return self.epochs_to_target is not None

    @property
    def final_rel_error(self):
        return self.trace[-1].rel_error if self.trace else float("nan")


class _FastSampler:
    """Per-run draw machinery: persistent Fisher-Yates buffers per partition;
    consumes the rng stream exactly like sampling.draw."""

    def __init__(self, part: Partitioning, rng):
        self.part = part
        self.rng = rng
        self.bufs = [m.copy() for m in part.members]

    def pick(self):
        if self.part.K == 1:
            return 0
        r = self.rng.random()
        return min(int(np.searchsorted(self.part.q_cum, r, side="right")), self.part.K - 1)

    def draw_nice(self, tau):
        j = self.pick()
        buf = self.bufs[j]
        kernels.partial_shuffle(buf, tau, self.rng.random(tau))
        rows = np.sort(buf[:tau])
        w = np.full(tau, self.part.sizes[j] / (self.part.q[j] * tau))
        return j, rows, w

    def draw_independent(self, tau):
        j = self.pick()
        members = self.part.members[j]
        p = tau / self.part.sizes[j]
        keep = self.rng.random(len(members)) < p
        rows = np.sort(members[keep])
        w = np.full(len(rows), 1.0 / (self.part.q[j] * p))
        return j, rows, w


def _gamma_bounds(strategy_family, profile, eps, mu, cap):
    """Lemma-style step-size bounds from the L(tau) range over feasible tau."""
    taus = range(1, strategy_family.partitioning.min_size + 1)
    Ls = np.array([expected_smoothness(strategy_family, t, profile) for t in taus])
    gamma_max = 0.5 / Ls.min()
    gamma_min = 0.5 * min(1.0 / Ls.max(), eps * mu / cap) if cap > 0 else 0.0
    return gamma_min, gamma_max, Ls


def run_adaptive(obj: Objective, part: Partitioning, variant: str, cfg: RunConfig,
                 x_star, profile: SmoothnessProfile | None = None) -> RunResult:
    """Adaptive batch-size SGD: per iteration pick tau^k from the tracked
    aggregates, form L^k, sigma^k, gamma^k, draw, step, lazily update."""
    if profile is None:
        profile = smoothness_profile(obj, part)
    eps, mu, cap = cfg.epsilon, profile.mu, cfg.cap
    family = make_strategy(variant, 1, partitioning=part)
    gamma_min, gamma_max, Ls = _gamma_bounds(family, profile, eps, mu, cap)
    rng = np.random.default_rng(cfg.seed)
    x = np.array(cfg.x0, dtype=np.float64) if cfg.x0 is not None else rng.standard_normal(obj.d)
    x_star = np.asarray(x_star, dtype=np.float64)
    dist0 = float(np.sum((x - x_star) ** 2))
    if dist0 == 0.0:
        dist0 = 1.0  # started at the solution; rel_error stays 0
    tracker = GradientTracker(obj, part, x)
    sampler = _FastSampler(part, rng)
    indptr, indices, values, labels, kind, lam = obj.arrays()
    inv_n = 1.0 / obj.n
    refresh_budget = cfg.tracker_refresh_epochs * obj.n
    since_refresh = 0.0
    nice = family.is_nice

    trace = []
    history = [] if cfg.record else None
    refresh_iters = []
    it = 0
    epochs = 0.0
    epochs_to_target = None
    while True:
        diff = x - x_star
        rel = float(diff @ diff) / dist0
        if not np.isfinite(rel) or not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite iterate at iteration {it}", trace)
        agg = tracker.aggregates()
        tau_k = optimal_tau(family, profile, agg, eps, mu)
        L_k = Ls[tau_k - 1]
        sigma_k = gradient_noise(family, tau_k, agg)
        gamma_k = step_size(L_k, sigma_k, eps, mu, cap)
        if not (gamma_min - 1e-15 <= gamma_k <= gamma_max + 1e-15):
            raise AssertionError(f"gamma {gamma_k} outside [{gamma_min}, {gamma_max}]")
        if rel <= cfg.target and epochs_to_target is None:
            epochs_to_target = epochs
        stop = ("target" if epochs_to_target is not None else
                "max_iters" if cfg.max_iters is not None and it >= cfg.max_iters else
                "max_epochs" if epochs >= cfg.max_epochs else None)
        if stop or it % cfg.trace_every == 0:
            trace.append(TraceRecord(it, epochs, rel, tau_k, gamma_k, sigma_k, L_k))
        if stop:
            return RunResult(trace, x, it, epochs, epochs_to_target, gamma_min, gamma_max,
                             stop, history, refresh_iters)
        if nice:
            _, rows, w = sampler.draw_nice(tau_k)
        else:
            _, rows, w = sampler.draw_independent(tau_k)
        if history is not None:
            history.append((rows.copy(), x.copy()))
        kernels.sgd_step_tracked(indptr, indices, values, labels, kind, lam, x,
                                 rows, w * inv_n, gamma_k, tracker.stored, tracker.h,
                                 part.part_of, tracker.part_sums, tracker.sum_h)
        epochs += len(rows) * inv_n
        since_refresh += len(rows)
        it += 1
        if since_refresh >= refresh_budget:
            tracker.refresh(x)
            refresh_iters.append(it)
            since_refresh = 0.0


def run_fixed(obj: Objective, part: Partitioning, strategy: SamplingStrategy,
              cfg: RunConfig, x_star, agg_at_xstar: NoiseAggregates,
              profile: SmoothnessProfile | None = None) -> RunResult:
    """Fixed batch size and fixed theory step size gamma(tau, sigma(x*, tau))."""
    if profile is None:
        profile = smoothness_profile(obj, part)
    eps, mu = cfg.epsilon, profile.mu
    tau = strategy.tau
    L_tau = expected_smoothness(strategy, tau, profile)
    sigma_star = gradient_noise(strategy, tau, agg_at_xstar)
    gamma = step_size(L_tau, sigma_star, eps, mu, cfg.cap)
    rng = np.random.default_rng(cfg.seed)
    x = np.array(cfg.x0, dtype=np.float64) if cfg.x0 is not None else rng.standard_normal(obj.d)
    x_star = np.asarray(x_star, dtype=np.float64)
    dist0 = float(np.sum((x - x_star) ** 2))
    if dist0 == 0.0:
        dist0 = 1.0
    sampler = _FastSampler(part, rng)
    indptr, indices, values, labels, kind, lam = obj.arrays()
    inv_n = 1.0 / obj.n
    nice = strategy.is_nice

    trace = []
    history = [] if cfg.record else None
    it = 0
    epochs = 0.0
    epochs_to_target = None
    while True:
        diff = x - x_star
        rel = float(diff @ diff) / dist0
        if not np.isfinite(rel) or not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite iterate at iteration {it}", trace)
        if rel <= cfg.target and epochs_to_target is None:
            epochs_to_target = epochs
        stop = ("target" if epochs_to_target is not None else
                "max_iters" if cfg.max_iters is not None and it >= cfg.max_iters else
                "max_epochs" if epochs >= cfg.max_epochs else None)
        if stop or it % cfg.trace_every == 0:
            trace.append(TraceRecord(it, epochs, rel, tau, gamma, sigma_star, L_tau))
        if stop:
            return RunResult(trace, x, it, epochs, epochs_to_target,
                             0.0, gamma, stop, history)
        if nice:
            _, rows, w = sampler.draw_nice(tau)
        else:
            _, rows, w = sampler.draw_independent(tau)
        if history is not None:
            history.append((rows.copy(), x.copy()))
        kernels.sgd_step(indptr, indices, values, labels, kind, lam, x, rows,
                         w * inv_n, gamma)
        epochs += len(rows) * inv_n
        it += 1


def derived_seed(seed, tag):
    """Deterministic per-(seed, tag) child seed for independent runs."""
    ss = np.random.SeedSequence([int(seed), int(tag)])
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def grid_search(obj: Objective, part: Partitioning, variant: str, tau_list,
                cfg: RunConfig, x_star, agg_at_xstar: NoiseAggregates,
                profile: SmoothnessProfile | None = None) -> dict:
    """Epochs-to-target for every tau in the grid (cfg.max_epochs when the
    target is not reached). All arms share one starting point drawn from the
    master seed; each tau's draws run on their own derived seed, so the
    full-batch entry is independent of the sampling seed."""
    if profile is None:
        profile = smoothness_profile(obj, part)
    x0 = cfg.x0
    if x0 is None:
        x0 = np.random.default_rng(cfg.seed).standard_normal(obj.d)
    out = {}
    for tau in tau_list:
        strategy = make_strategy(variant, int(tau), partitioning=part)
        sub = replace(cfg, seed=derived_seed(cfg.seed, tau), x0=x0)
        res = run_fixed(obj, part, strategy, sub, x_star, agg_at_xstar, profile)
        out[int(tau)] = res.epochs_to_target if res.reached_target else float(cfg.max_epochs)
    return out
