"""Ridge and logistic finite-sum objectives and their smoothness constants.

The objective is f(x) = (1/n) sum_i f_i(x) with

    ridge:    f_i(x) = 1/2 (a_i.x - b_i)^2          + (lam/2)||x||^2
    logistic: f_i(x) = 1/2 log(1 + exp(b_i a_i.x))  + (lam/2)||x||^2

so that f matches the displayed (1/2n)-sum losses exactly. Note the logistic
loss keeps b_i inside exp without a minus sign; it is convex and smooth all
the same. Strong convexity is certified by mu = lam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Dataset, Partitioning
from .kernels import KIND_LOGISTIC, KIND_RIDGE  # re-exported by both backends
from . import kernels

KINDS = {"ridge": KIND_RIDGE, "logistic": KIND_LOGISTIC}


class PowerIterationError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class SolveError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class Objective:
    """Immutable objective over a Dataset; gradient evaluation is pure."""

    def __init__(self, data: Dataset, kind: str, lam: float):
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {sorted(KINDS)}, got {kind!r}")
        if lam <= 0:
            raise ValueError("regularization weight must be positive (strong convexity)")
        self.data = data
        self.kind = kind
        self.kind_code = KINDS[kind]
        self.lam = float(lam)
        self.row_sq = data.row_norms_sq()
        self._csr = data.to_csr()

    @property
    def n(self):
        return self.data.n

    @property
    def d(self):
        return self.data.d

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        t = self._csr @ x
        reg = 0.5 * self.lam * (x @ x)
        if self.kind_code == KIND_RIDGE:
            r = t - self.data.labels
            return (r @ r) / (2 * self.n) + reg
        z = self.data.labels * t
        return np.logaddexp(0.0, z).sum() / (2 * self.n) + reg

    def component_gradient(self, i, x):
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} out of range [0, {self.n})")
        x = np.asarray(x, dtype=np.float64)
        idx, val = self.data.row(i)
        t = val @ x[idx]
        b = self.data.labels[i]
        if self.kind_code == KIND_RIDGE:
            c = t - b
        else:
            c = 0.5 * b * expit(b * t)
        g = self.lam * x
        g[idx] += c * val
        return g

    def full_gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        t = self._csr @ x
        b = self.data.labels
        if self.kind_code == KIND_RIDGE:
            c = t - b
        else:
            c = 0.5 * b * expit(b * t)
        return self._csr.T @ c / self.n + self.lam * x

    def arrays(self):
        """Raw arrays consumed by the kernel backends."""
        ds = self.data
        return ds.indptr, ds.indices, ds.values, ds.labels, self.kind_code, self.lam

    def curvature_rows(self):
        """Per-row curvature bound of the data term (excludes lam)."""
        if self.kind_code == KIND_RIDGE:
            return self.row_sq
        return (self.data.labels ** 2) * self.row_sq / 8.0

    def _spectral_matvec(self, rows=None):
        """Matvec v -> (1/m) B^T B v where B is (scaled) rows of the data term."""
        A = self._csr if rows is None else self._csr[rows]
        m = A.shape[0]
        if self.kind_code == KIND_LOGISTIC:
            b = self.data.labels if rows is None else self.data.labels[rows]
            from scipy.sparse import diags
            A = diags(b) @ A
        scale = 1.0 if self.kind_code == KIND_RIDGE else 0.125
        return lambda v: (A.T @ (A @ v)) * (scale / m)


@dataclass
class SmoothnessProfile:
    """All smoothness/convexity constants the step-size theory consumes."""

    L_i: np.ndarray      # per-component smoothness
    L: float             # smoothness of f
    L_Cj: np.ndarray     # smoothness of each partition mean f_Cj
    Lmax_Cj: np.ndarray  # max_i L_i within each partition
    Lbar_Cj: np.ndarray  # mean of L_i within each partition (diagnostic only)
    mu: float

    def __post_init__(self):
        slack = 1e-9 * max(1.0, abs(self.L))
        if not (self.mu <= self.L + slack):
            raise ValueError(f"mu={self.mu} exceeds L={self.L}")
        if self.L > self.L_i.max() + slack:
            raise ValueError("L exceeds max component smoothness")
        if np.any(self.L_Cj > self.Lmax_Cj + slack):
            raise ValueError("partition smoothness exceeds its max component smoothness")
        if min(self.L, self.L_i.min(), self.L_Cj.min(), self.mu) <= 0:
            raise ValueError("all smoothness constants must be positive")

    @property
    def Lmax(self):
        return float(self.L_i.max())


def power_iteration(matvec, dim, tol=1e-9, max_iter=10_000, seed=0):
    """Largest eigenvalue of a PSD operator by power iteration.

    Converges when the Rayleigh quotient moves by at most tol*max(1, lam);
    raises PowerIterationError past max_iter.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam_prev = np.inf
    for _ in range(max_iter):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam = float(v @ w)
        v = w / nw
        if abs(lam - lam_prev) <= tol * max(1.0, abs(lam)):
            return lam
        lam_prev = lam
    raise PowerIterationError("power iteration did not converge", abs(lam - lam_prev))


def smoothness_profile(obj: Objective, part: Partitioning) -> SmoothnessProfile:
    """Compute L_i, L, per-partition L_Cj and Lmax_Cj, and mu = lam.

    Spectral constants come from power iteration on (1/m) B^T B (tolerance
    1e-9, cap 10000); logistic scales the data curvature by 1/8 and by b_i^2,
    which reduces to the plain 1/8 scaling for +-1 labels.
    """
    L_i = obj.curvature_rows() + obj.lam
    L = power_iteration(obj._spectral_matvec(), obj.d) + obj.lam
    L_Cj = np.empty(part.K)
    Lmax_Cj = np.empty(part.K)
    Lbar_Cj = np.empty(part.K)
    for j, m in enumerate(part.members):
        L_Cj[j] = power_iteration(obj._spectral_matvec(m), obj.d) + obj.lam
        Lmax_Cj[j] = L_i[m].max()
        Lbar_Cj[j] = L_i[m].mean()
    return SmoothnessProfile(L_i=L_i, L=L, L_Cj=L_Cj, Lmax_Cj=Lmax_Cj,
                             Lbar_Cj=Lbar_Cj, mu=obj.lam)


def solve_reference(obj: Objective, tol=1e-10, max_iter=None):
    """Reference minimizer x*.

    ridge: conjugate gradient on ((1/n) A^T A + lam I) x = (1/n) A^T b run to
    residual <= tol (the residual is exactly -grad f). logistic: full-batch
    gradient descent with step 1/L until ||grad f|| <= tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if obj.kind_code == KIND_RIDGE:
        return _solve_ridge_cg(obj, tol, max_iter or max(10 * obj.d, 1000))
    return _solve_logistic_gd(obj, tol, max_iter or 500_000)


def _solve_ridge_cg(obj, tol, max_iter):
    A = obj._csr
    n, lam = obj.n, obj.lam
    rhs = A.T @ obj.data.labels / n
    matvec = lambda v: A.T @ (A @ v) / n + lam * v
    x = np.zeros(obj.d)
    r = rhs - matvec(x)
    p = r.copy()
    rs = r @ r
    if np.sqrt(rs) <= tol:
        return x
    for _ in range(max_iter):
        Ap = matvec(p)
        alpha = rs / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rs_new = r @ r
        if np.sqrt(rs_new) <= tol:
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolveError("conjugate gradient exceeded the iteration cap", np.sqrt(rs))


def _solve_logistic_gd(obj, tol, max_iter):
    L = power_iteration(obj._spectral_matvec(), obj.d) + obj.lam
    x = np.zeros(obj.d)
    step = 1.0 / L
    for _ in range(max_iter):
        g = obj.full_gradient(x)
        gn = np.linalg.norm(g)
        if gn <= tol:
            return x
        x -= step * g
    raise SolveError("gradient descent exceeded the iteration cap", gn)
