# Compiled kernel implementations; mirrors _core_py exactly.
# kind: 0 = ridge, 1 = logistic.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

KIND_RIDGE = 0
KIND_LOGISTIC = 1


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _coeff(int kind, double t, double b) noexcept nogil:
    if kind == 0:
        return t - b
    return 0.5 * b * _sigmoid(b * t)


cdef inline double _dot_row(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                            const double[::1] values, const double[::1] x,
                            Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t s = indptr[i], e = indptr[i + 1], k
    cdef double acc = 0.0
    for k in range(s, e):
        acc += values[k] * x[indices[k]]
    return acc


def row_dots(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
             const double[::1] values, const double[::1] x, const cnp.int64_t[::1] rows):
    cdef Py_ssize_t m = rows.shape[0], k
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] t = out
    with nogil:
        for k in range(m):
            t[k] = _dot_row(indptr, indices, values, x, rows[k])
    return out


def grad_batch(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] values, const double[::1] labels, int kind, double lam,
               const double[::1] x, const cnp.int64_t[::1] rows, const double[::1] weights):
    cdef Py_ssize_t d = x.shape[0], m = rows.shape[0]
    out = np.zeros(d, dtype=np.float64)
    cdef double[::1] g = out
    cdef Py_ssize_t k, i, s, e, l
    cdef double t, c, wsum = 0.0
    with nogil:
        for k in range(m):
            i = rows[k]
            t = _dot_row(indptr, indices, values, x, i)
            c = _coeff(kind, t, labels[i]) * weights[k]
            s = indptr[i]
            e = indptr[i + 1]
            for l in range(s, e):
                g[indices[l]] += c * values[l]
            wsum += weights[k]
        c = lam * wsum
        for l in range(d):
            g[l] += c * x[l]
    return out


def sgd_step(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
             const double[::1] values, const double[::1] labels, int kind, double lam,
             double[::1] x, const cnp.int64_t[::1] rows, const double[::1] weights,
             double gamma):
    g = grad_batch(indptr, indices, values, labels, kind, lam, x, rows, weights)
    cdef double[::1] gv = g
    cdef Py_ssize_t l
    with nogil:
        for l in range(x.shape[0]):
            x[l] -= gamma * gv[l]


cdef void _update_one(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                      const double[::1] values, int kind, double lam,
                      const double[::1] x, Py_ssize_t i, double b,
                      double[:, ::1] stored, double[::1] h,
                      const cnp.int64_t[::1] part_id, double[:, ::1] part_sums,
                      double[::1] sum_h, double[::1] gnew) noexcept nogil:
    cdef Py_ssize_t d = x.shape[0], s = indptr[i], e = indptr[i + 1], l
    cdef Py_ssize_t j = part_id[i]
    cdef double t = _dot_row(indptr, indices, values, x, i)
    cdef double c = _coeff(kind, t, b)
    cdef double hnew = 0.0
    for l in range(d):
        gnew[l] = lam * x[l]
    for l in range(s, e):
        gnew[indices[l]] += c * values[l]
    for l in range(d):
        part_sums[j, l] += gnew[l] - stored[i, l]
        hnew += gnew[l] * gnew[l]
        stored[i, l] = gnew[l]
    sum_h[j] += hnew - h[i]
    h[i] = hnew


def tracker_update(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                   const double[::1] values, const double[::1] labels, int kind, double lam,
                   const double[::1] x, const cnp.int64_t[::1] rows,
                   double[:, ::1] stored, double[::1] h, const cnp.int64_t[::1] part_id,
                   double[:, ::1] part_sums, double[::1] sum_h):
    cdef Py_ssize_t m = rows.shape[0], k
    if m == 0:
        return
    buf = np.empty(x.shape[0], dtype=np.float64)
    cdef double[::1] gnew = buf
    with nogil:
        for k in range(m):
            _update_one(indptr, indices, values, kind, lam, x, rows[k], labels[rows[k]],
                        stored, h, part_id, part_sums, sum_h, gnew)


def sgd_step_tracked(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                     const double[::1] values, const double[::1] labels, int kind, double lam,
                     double[::1] x, const cnp.int64_t[::1] rows, const double[::1] weights,
                     double gamma, double[:, ::1] stored, double[::1] h,
                     const cnp.int64_t[::1] part_id, double[:, ::1] part_sums,
                     double[::1] sum_h):
    cdef Py_ssize_t m = rows.shape[0], d = x.shape[0], k, l
    if m == 0:
        return
    buf = np.empty(d, dtype=np.float64)
    acc = np.zeros(d, dtype=np.float64)
    cdef double[::1] gnew = buf
    cdef double[::1] gbatch = acc
    with nogil:
        for k in range(m):
            _update_one(indptr, indices, values, kind, lam, x, rows[k], labels[rows[k]],
                        stored, h, part_id, part_sums, sum_h, gnew)
            for l in range(d):
                gbatch[l] += weights[k] * gnew[l]
        for l in range(d):
            x[l] -= gamma * gbatch[l]


def tracker_refresh(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                    const double[::1] values, const double[::1] labels, int kind, double lam,
                    const double[::1] x, double[:, ::1] stored, double[::1] h,
                    const cnp.int64_t[::1] part_id, double[:, ::1] part_sums,
                    double[::1] sum_h):
    cdef Py_ssize_t n = labels.shape[0], d = x.shape[0], i, j, l
    cdef double hi
    buf = np.empty(d, dtype=np.float64)
    cdef double[::1] gnew = buf
    with nogil:
        for j in range(part_sums.shape[0]):
            sum_h[j] = 0.0
            for l in range(d):
                part_sums[j, l] = 0.0
        for i in range(n):
            j = part_id[i]
            hi = 0.0
            # same math as _update_one but accumulating from zeroed sums
            _refresh_one(indptr, indices, values, kind, lam, x, i, labels[i], gnew)
            for l in range(d):
                stored[i, l] = gnew[l]
                part_sums[j, l] += gnew[l]
                hi += gnew[l] * gnew[l]
            h[i] = hi
            sum_h[j] += hi


cdef void _refresh_one(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                       const double[::1] values, int kind, double lam,
                       const double[::1] x, Py_ssize_t i, double b,
                       double[::1] gnew) noexcept nogil:
    cdef Py_ssize_t d = x.shape[0], s = indptr[i], e = indptr[i + 1], l
    cdef double t = _dot_row(indptr, indices, values, x, i)
    cdef double c = _coeff(kind, t, b)
    for l in range(d):
        gnew[l] = lam * x[l]
    for l in range(s, e):
        gnew[indices[l]] += c * values[l]


def partial_shuffle(cnp.int64_t[::1] perm, Py_ssize_t tau, const double[::1] u):
    cdef Py_ssize_t m = perm.shape[0], k, j
    cdef cnp.int64_t tmp
    with nogil:
        for k in range(tau):
            j = k + <Py_ssize_t>(u[k] * (m - k))
            if j >= m:
                j = m - 1
            tmp = perm[k]
            perm[k] = perm[j]
            perm[j] = tmp
