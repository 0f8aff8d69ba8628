"""Closed-form quantities for mini-batch SGD on strongly convex finite sums:
expected smoothness L(tau), gradient noise sigma(x, tau), the step-size rule,
iteration bounds, total complexity T(tau), and the optimal batch size.

The partition formulas evaluated on a single partition with q = 1 coincide
with the dedicated nice/independent expressions; both code paths exist and
the test suite pins them against each other and against exact enumeration
of the sampling distributions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .objectives import Objective, SmoothnessProfile
from .sampling import SamplingStrategy, enumerate_draws
from .data import Partitioning

logger = logging.getLogger(__name__)


@dataclass
class NoiseAggregates:
    """Squared gradient norms h_i and their partition aggregates at a point.

    h_Cj is the squared norm of the partition's mean gradient, hbar_Cj the
    partition mean of the h_i; Jensen forces h_Cj <= hbar_Cj.
    """

    h: np.ndarray        # (n,) per-component ||grad f_i||^2
    h_Cj: np.ndarray     # (K,)
    hbar_Cj: np.ndarray  # (K,)
    hbar: float

    def __post_init__(self):
        if np.any(self.h < 0) or np.any(self.h_Cj < 0) or np.any(self.hbar_Cj < 0):
            raise ValueError("squared norms must be nonnegative")
        tol = 1e-9 * (1.0 + np.abs(self.hbar_Cj))
        if np.any(self.h_Cj > self.hbar_Cj + tol):
            raise ValueError("h_Cj exceeds hbar_Cj; Jensen violated")


def noise_aggregates_exact(obj: Objective, part: Partitioning, x) -> NoiseAggregates:
    """Full pass: every component gradient's squared norm plus the partition
    mean-gradient norms, computed exactly at x."""
    x = np.asarray(x, dtype=np.float64)
    ds = obj.data
    t = obj._csr @ x
    b = ds.labels
    if obj.kind_code == 0:
        c = t - b
    else:
        from scipy.special import expit
        c = 0.5 * b * expit(b * t)
    # h_i = ||c_i a_i + lam x||^2 expanded to avoid materializing gradients
    lam = obj.lam
    xx = x @ x
    h = c * c * obj.row_sq + 2.0 * lam * c * t + lam * lam * xx
    h = np.maximum(h, 0.0)  # clamp tiny negative rounding
    K = part.K
    sums = np.zeros((K, obj.d))
    row_of = np.repeat(np.arange(obj.n), np.diff(ds.indptr))
    np.add.at(sums, (part.part_of[row_of], ds.indices), c[row_of] * ds.values)
    sums += part.sizes[:, None] * (lam * x)
    means = sums / part.sizes[:, None]
    h_Cj = np.einsum("ij,ij->i", means, means)
    hbar_Cj = np.array([h[m].mean() for m in part.members])
    return NoiseAggregates(h=h, h_Cj=h_Cj, hbar_Cj=hbar_Cj, hbar=float(h.mean()))


def _independent_probs(strategy: SamplingStrategy, tau):
    """(p per index grouped by partition); default rule p_i = tau/n_Cj."""
    part = strategy.partitioning
    if strategy.p is not None:
        if tau != strategy.tau:
            raise ValueError("explicit inclusion probabilities pin tau")
        return [strategy.p[m] for m in part.members]
    return [np.full(len(m), tau / part.sizes[j]) for j, m in enumerate(part.members)]


def expected_smoothness(strategy: SamplingStrategy, tau, profile: SmoothnessProfile) -> float:
    """Expected-smoothness bound L(tau) for the strategy's sampling law."""
    part = strategy.partitioning
    n = part.n
    if not 1 <= tau <= part.min_size:
        raise ValueError(f"tau={tau} outside [1, {part.min_size}]")
    if strategy.variant == "nice":
        if n == 1:
            return profile.L
        Lmax = profile.Lmax
        return (n * (tau - 1) * profile.L + (n - tau) * Lmax) / (tau * (n - 1))
    if strategy.variant == "independent":
        p = _independent_probs(strategy, tau)[0]
        return profile.L + float(np.max((1.0 - p) / p * profile.L_i)) / n
    if strategy.variant == "partition_nice":
        if part.min_size < 2:
            raise ValueError("partition-nice smoothness undefined for singleton partitions")
        terms = (part.sizes / (part.q * (part.sizes - 1))) * (
            (tau - 1) * profile.L_Cj * part.sizes + (part.sizes - tau) * profile.Lmax_Cj)
        return float(terms.max()) / (n * tau)
    # partition_independent
    ps = _independent_probs(strategy, tau)
    best = -np.inf
    for j, m in enumerate(part.members):
        p = ps[j]
        tail = float(np.max((1.0 - p) / p * profile.L_i[m]))
        best = max(best, (part.sizes[j] * profile.L_Cj[j] + tail) / part.q[j])
    return best / n


def gradient_noise(strategy: SamplingStrategy, tau, agg: NoiseAggregates) -> float:
    """Gradient noise sigma(x, tau) = E ||grad f_v(x)||^2 under the strategy's
    law, evaluated with whatever h aggregates are supplied (exact or tracked)."""
    part = strategy.partitioning
    n = part.n
    if not 1 <= tau <= part.min_size:
        raise ValueError(f"tau={tau} outside [1, {part.min_size}]")
    if strategy.variant == "nice":
        if n == 1:
            return float(agg.h_Cj[0])
        return (n * (tau - 1) * agg.h_Cj[0] + (n - tau) * agg.hbar) / (tau * (n - 1))
    if strategy.variant == "independent":
        p = _independent_probs(strategy, tau)[0]
        tail = float(np.sum((1.0 - p) / p * agg.h))
        return float(agg.h_Cj[0]) + tail / (n * n)
    if strategy.variant == "partition_nice":
        terms = (part.sizes ** 2 / (part.q * (part.sizes - 1))) * (
            (tau - 1) * agg.h_Cj * part.sizes + (part.sizes - tau) * agg.hbar_Cj)
        return float(terms.sum()) / (n * n * tau)
    # partition_independent
    ps = _independent_probs(strategy, tau)
    total = 0.0
    for j, m in enumerate(part.members):
        p = ps[j]
        tail = float(np.sum((1.0 - p) / p * agg.h[m]))
        total += (part.sizes[j] ** 2 * agg.h_Cj[j] + tail) / part.q[j]
    return total / (n * n)


def step_size(L_tau, sigma, eps, mu, cap=0.0) -> float:
    """gamma = 1/2 min(1/L, eps*mu / min(C, 2 sigma)).

    cap = 0 disables the cap (the noise term uses 2 sigma); a vanishing
    denominator means the noise term is vacuous and gamma = 1/(2L).
    """
    if L_tau <= 0:
        raise ValueError("expected smoothness must be positive")
    if sigma < 0:
        raise ValueError("gradient noise must be nonnegative")
    if eps <= 0 or mu <= 0:
        raise ValueError("eps and mu must be positive")
    denom = 2.0 * sigma if cap <= 0 else min(cap, 2.0 * sigma)
    if denom <= 0:
        return 0.5 / L_tau
    return 0.5 * min(1.0 / L_tau, eps * mu / denom)


def iteration_bound(L_tau, sigma, eps, mu, x0_dist_sq) -> int:
    """Iterations guaranteeing E||x^k - x*||^2 <= eps with the rule above."""
    if 2.0 * x0_dist_sq <= eps:
        return 0
    rate = (2.0 / mu) * max(L_tau, 2.0 * sigma / (eps * mu))
    return int(math.ceil(rate * math.log(2.0 * x0_dist_sq / eps)))


@dataclass
class TotalComplexity:
    tau: int
    value: float              # T(tau)
    smoothness_branch: float  # tau * L(tau)
    noise_branch: float       # (2/(eps mu)) * tau * sigma(x*, tau)

    @property
    def binding(self):
        return "smoothness" if self.smoothness_branch >= self.noise_branch else "noise"


def total_complexity(strategy, tau, profile, agg_at_xstar, eps, mu, x0_dist_sq) -> TotalComplexity:
    """T(tau): iterations-to-eps times tau, from the closed-form bounds."""
    sb = tau * expected_smoothness(strategy, tau, profile)
    nb = (2.0 / (eps * mu)) * tau * gradient_noise(strategy, tau, agg_at_xstar)
    log_term = math.log(2.0 * x0_dist_sq / eps) if 2.0 * x0_dist_sq > eps else 0.0
    return TotalComplexity(tau=int(tau), value=(2.0 / mu) * max(sb, nb) * log_term,
                           smoothness_branch=sb, noise_branch=nb)


def _inner_complexity(strategy, tau, profile, agg, eps, mu):
    """max(tau L(tau), (2/eps mu) tau sigma(tau)): T(tau) without constants."""
    return max(tau * expected_smoothness(strategy, tau, profile),
               (2.0 / (eps * mu)) * tau * gradient_noise(strategy, tau, agg))


def brute_force_optimal_tau(strategy, profile, agg, eps, mu) -> int:
    """Integer argmin of T(tau) by direct scan (ties go to the smaller tau)."""
    taus = range(1, strategy.partitioning.min_size + 1)
    vals = [_inner_complexity(strategy, t, profile, agg, eps, mu) for t in taus]
    return 1 + int(np.argmin(vals))


def optimal_tau(strategy: SamplingStrategy, profile: SmoothnessProfile,
                agg: NoiseAggregates, eps, mu) -> int:
    """Optimal batch size: the integer minimizer of T(tau).

    Solves the intersection of the increasing smoothness branch(es) with the
    decreasing noise branch in closed form, then evaluates T at floor/ceil
    and clamps to [1, min_j n_Cj]. When the noise branch is not decreasing
    (the gate inequality fails) the optimum is 1. Independent variants
    require the p_i = tau/n_Cj rule.
    """
    part = strategy.partitioning
    n = part.n
    tau_max = part.min_size
    if tau_max == 1:
        return 1
    c = 2.0 / (eps * mu)
    sizes = part.sizes.astype(np.float64)
    if strategy.is_nice:
        if strategy.variant == "nice" and n == 1:
            return 1
        e = part.e
        gate = float(np.sum((sizes ** 2 / e) * (sizes * agg.h_Cj - agg.hbar_Cj)))
        if gate > 0:
            return 1
        s3 = float(np.sum((sizes ** 3 / e) * (agg.hbar_Cj - agg.h_Cj)))
        s2 = float(np.sum((sizes ** 2 / e) * (agg.hbar_Cj - sizes * agg.h_Cj)))
        nums = n * (sizes ** 2 / e) * (profile.L_Cj - profile.Lmax_Cj) + c * s3
        dens = n * (sizes / e) * (sizes * profile.L_Cj - profile.Lmax_Cj) + c * s2
    else:
        if strategy.p is not None:
            raise ValueError("optimal tau for independent sampling requires the p_i = tau/n_Cj rule")
        q = part.q
        gate = float(np.sum((sizes / q) * (sizes * agg.h_Cj - agg.hbar_Cj)))
        if gate > 0:
            return 1
        sa = float(np.sum((sizes ** 2 / q) * agg.hbar_Cj))
        sb = float(np.sum((sizes / q) * (agg.hbar_Cj - sizes * agg.h_Cj)))
        nums = c * sa - n * sizes * profile.Lmax_Cj / q
        dens = c * sb + (n / q) * (sizes * profile.L_Cj - profile.Lmax_Cj)
    valid = dens > 0
    if not np.any(valid):
        logger.warning("degenerate optimal-tau denominators; falling back to brute-force scan")
        return brute_force_optimal_tau(strategy, profile, agg, eps, mu)
    tau_real = float(np.min(nums[valid] / dens[valid]))
    tau_real = min(max(tau_real, 1.0), float(tau_max))
    lo, hi = int(math.floor(tau_real)), int(math.ceil(tau_real))
    if lo == hi:
        return lo
    f_lo = _inner_complexity(strategy, lo, profile, agg, eps, mu)
    f_hi = _inner_complexity(strategy, hi, profile, agg, eps, mu)
    return lo if f_lo <= f_hi else hi


@dataclass
class VerifyReport:
    """Formula-vs-enumeration check of the noise and smoothness bounds."""

    variant: str
    tau: int
    sigma_formula: float
    sigma_enumerated: float
    abs_diff: float
    bound_lhs: float  # enumerated E||grad f_v(x) - grad f_v(x*)||^2
    bound_rhs: float  # 2 L(tau) (f(x) - f(x*))
    prob_total: float

    @property
    def bound_ok(self):
        return self.bound_lhs <= self.bound_rhs + 1e-9

    def sigma_ok(self, rel=1e-9):
        return self.abs_diff <= rel * (1.0 + self.sigma_enumerated)


def _component_gradients(obj: Objective, x):
    """Dense (n, d) matrix of all component gradients (enumeration helper)."""
    x = np.asarray(x, dtype=np.float64)
    t = obj._csr @ x
    b = obj.data.labels
    if obj.kind_code == 0:
        c = t - b
    else:
        from scipy.special import expit
        c = 0.5 * b * expit(b * t)
    return c[:, None] * obj._csr.toarray() + obj.lam * x


def verify_noise_formula(strategy: SamplingStrategy, tau, obj: Objective, x,
                         x_star=None, profile=None) -> VerifyReport:
    """Enumerate E||grad f_v(x)||^2 and compare with the closed form; also
    check the expected-smoothness inequality against 2 L(tau)(f(x) - f(x*))."""
    from .objectives import smoothness_profile, solve_reference
    strat = strategy.with_tau(tau)
    part = strategy.partitioning
    if x_star is None:
        x_star = solve_reference(obj, tol=1e-12 if obj.kind == "ridge" else 1e-10)
    if profile is None:
        profile = smoothness_profile(obj, part)
    G = _component_gradients(obj, x)
    Gs = _component_gradients(obj, x_star)
    n = obj.n
    sigma_enum = 0.0
    lhs = 0.0
    prob_total = 0.0
    for dr, prob in enumerate_draws(strat):
        if dr.size:
            g = dr.weights @ G[dr.indices] / n
            gs = dr.weights @ Gs[dr.indices] / n
        else:
            g = np.zeros(obj.d)
            gs = np.zeros(obj.d)
        sigma_enum += prob * float(g @ g)
        diff = g - gs
        lhs += prob * float(diff @ diff)
        prob_total += prob
    agg = noise_aggregates_exact(obj, part, x)
    sigma_formula = gradient_noise(strat, tau, agg)
    rhs = 2.0 * expected_smoothness(strat, tau, profile) * (obj.value(x) - obj.value(x_star))
    return VerifyReport(variant=strategy.variant, tau=int(tau),
                        sigma_formula=sigma_formula, sigma_enumerated=sigma_enum,
                        abs_diff=abs(sigma_formula - sigma_enum),
                        bound_lhs=lhs, bound_rhs=rhs, prob_total=prob_total)
