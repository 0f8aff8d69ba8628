"""Hot-loop kernels: batch gradients, fused SGD steps, tracker maintenance.

Two interchangeable implementations exist: a Cython extension (_core) and a
pure-NumPy fallback (_core_py). The extension is used when it importable and
the environment variable ADABATCH_PURE_PYTHON is unset; both expose the same
functions and the same sampling-stream behaviour, so runs differ across
backends only by floating-point summation order.
"""

import os

from . import _core_py

KIND_RIDGE = _core_py.KIND_RIDGE
KIND_LOGISTIC = _core_py.KIND_LOGISTIC

try:
    from . import _core  # compiled extension, absent on source-only installs
except ImportError:
    _core = None

_BACKENDS = {"python": _core_py}
if _core is not None:
    _BACKENDS["cython"] = _core

if os.environ.get("ADABATCH_PURE_PYTHON"):
    _active = "python"
else:
    _active = "cython" if _core is not None else "python"


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return _active


def get_backend(name=None):
    """Return the kernel module for `name` (default: the active backend)."""
    if name is None:
        name = _active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}")


def set_backend(name):
    """Switch the active backend. Returns the previous backend name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}")
    prev = _active
    _active = name
    return prev


def row_dots(indptr, indices, values, x, rows):
    return get_backend().row_dots(indptr, indices, values, x, rows)


def grad_batch(indptr, indices, values, labels, kind, lam, x, rows, weights):
    return get_backend().grad_batch(indptr, indices, values, labels, kind, lam, x, rows, weights)


def sgd_step(indptr, indices, values, labels, kind, lam, x, rows, weights, gamma):
    return get_backend().sgd_step(indptr, indices, values, labels, kind, lam, x, rows, weights, gamma)


def sgd_step_tracked(indptr, indices, values, labels, kind, lam, x, rows, weights, gamma,
                     stored, h, part_id, part_sums, sum_h):
    return get_backend().sgd_step_tracked(
        indptr, indices, values, labels, kind, lam, x, rows, weights, gamma,
        stored, h, part_id, part_sums, sum_h)


def tracker_update(indptr, indices, values, labels, kind, lam, x, rows,
                   stored, h, part_id, part_sums, sum_h):
    return get_backend().tracker_update(
        indptr, indices, values, labels, kind, lam, x, rows, stored, h, part_id, part_sums, sum_h)


def tracker_refresh(indptr, indices, values, labels, kind, lam, x,
                    stored, h, part_id, part_sums, sum_h):
    return get_backend().tracker_refresh(
        indptr, indices, values, labels, kind, lam, x, stored, h, part_id, part_sums, sum_h)


def partial_shuffle(perm, tau, u):
    return get_backend().partial_shuffle(perm, tau, u)
