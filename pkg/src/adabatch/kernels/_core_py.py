"""Pure-NumPy kernel implementations (fallback backend).

Component gradients follow the finite-sum convention f = (1/n) sum f_i with
f_i = n * (i-th summand of the displayed loss) + (lam/2)||x||^2, so

    ridge:    grad f_i(x) = (a_i.x - b_i) a_i + lam x
    logistic: grad f_i(x) = 0.5 b_i sigmoid(b_i a_i.x) a_i + lam x

`kind` is 0 for ridge, 1 for logistic.
"""

import numpy as np

KIND_RIDGE = 0
KIND_LOGISTIC = 1


def _sigmoid(z):
    # overflow-safe elementwise sigmoid
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _coeffs(kind, t, b):
    """Scalar multiplier of a_i inside grad f_i, for each sampled row."""
    if kind == KIND_RIDGE:
        return t - b
    return 0.5 * b * _sigmoid(b * t)


def row_dots(indptr, indices, values, x, rows):
    t = np.empty(len(rows), dtype=np.float64)
    for k, i in enumerate(rows):
        s, e = indptr[i], indptr[i + 1]
        t[k] = values[s:e] @ x[indices[s:e]]
    return t


def grad_batch(indptr, indices, values, labels, kind, lam, x, rows, weights):
    """sum_k weights[k] * grad f_{rows[k]}(x)."""
    g = np.zeros_like(x)
    if len(rows) == 0:
        return g
    t = row_dots(indptr, indices, values, x, rows)
    c = _coeffs(kind, t, labels[rows]) * weights
    for k, i in enumerate(rows):
        s, e = indptr[i], indptr[i + 1]
        g[indices[s:e]] += c[k] * values[s:e]
    g += (lam * np.sum(weights)) * x
    return g


def sgd_step(indptr, indices, values, labels, kind, lam, x, rows, weights, gamma):
    g = grad_batch(indptr, indices, values, labels, kind, lam, x, rows, weights)
    x -= gamma * g


def _row_grad(indptr, indices, values, kind, lam, x, i, t, b):
    g = lam * x
    s, e = indptr[i], indptr[i + 1]
    if kind == KIND_RIDGE:
        c = t - b
    else:
        z = b * t
        c = 0.5 * b * (1.0 / (1.0 + np.exp(-z)) if z >= 0 else np.exp(z) / (1.0 + np.exp(z)))
    g[indices[s:e]] += c * values[s:e]
    return g


def tracker_update(indptr, indices, values, labels, kind, lam, x, rows,
                   stored, h, part_id, part_sums, sum_h):
    """Lazy refresh: recompute grad f_i(x) for i in rows, fold deltas into the
    partition sums, and store the fresh gradient and its squared norm."""
    if len(rows) == 0:
        return
    t = row_dots(indptr, indices, values, x, rows)
    for k, i in enumerate(rows):
        gnew = _row_grad(indptr, indices, values, kind, lam, x, i, t[k], labels[i])
        j = part_id[i]
        part_sums[j] += gnew - stored[i]
        hnew = gnew @ gnew
        sum_h[j] += hnew - h[i]
        stored[i] = gnew
        h[i] = hnew


def sgd_step_tracked(indptr, indices, values, labels, kind, lam, x, rows, weights, gamma,
                     stored, h, part_id, part_sums, sum_h):
    """One fused iteration: refresh the tracker at the sampled rows with the
    gradients the step itself uses, then apply x <- x - gamma * sum w_k g_k."""
    if len(rows) == 0:
        return
    t = row_dots(indptr, indices, values, x, rows)
    gbatch = np.zeros_like(x)
    for k, i in enumerate(rows):
        gnew = _row_grad(indptr, indices, values, kind, lam, x, i, t[k], labels[i])
        j = part_id[i]
        part_sums[j] += gnew - stored[i]
        hnew = gnew @ gnew
        sum_h[j] += hnew - h[i]
        stored[i] = gnew
        h[i] = hnew
        gbatch += weights[k] * gnew
    x -= gamma * gbatch


def tracker_refresh(indptr, indices, values, labels, kind, lam, x,
                    stored, h, part_id, part_sums, sum_h):
    """Full recomputation of every stored gradient and all aggregates at x."""
    n = len(labels)
    part_sums[:] = 0.0
    sum_h[:] = 0.0
    all_rows = np.arange(n)
    t = row_dots(indptr, indices, values, x, all_rows)
    for i in range(n):
        gnew = _row_grad(indptr, indices, values, kind, lam, x, i, t[i], labels[i])
        stored[i] = gnew
        hi = gnew @ gnew
        h[i] = hi
        j = part_id[i]
        part_sums[j] += gnew
        sum_h[j] += hi


def partial_shuffle(perm, tau, u):
    """Fisher-Yates prefix shuffle driven by uniforms u[0..tau); afterwards
    perm[:tau] is a uniform tau-subset of perm's contents."""
    m = len(perm)
    for k in range(tau):
        j = k + int(u[k] * (m - k))
        if j >= m:  # guards u == 1.0 edge, unreachable for u in [0, 1)
            j = m - 1
        perm[k], perm[j] = perm[j], perm[k]
