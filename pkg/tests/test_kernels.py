"""Backend equivalence: the Cython extension and the pure-NumPy fallback must
compute the same quantities (up to float summation order) and share the exact
sampling-stream behaviour."""

import numpy as np
import pytest

from adabatch import kernels
from adabatch.kernels import _core_py
from conftest import ridge_instance, logistic_instance


cython_core = pytest.importorskip("adabatch.kernels._core") \
    if "cython" in kernels.available_backends() else None

if cython_core is None:  # pragma: no cover - source-only environments
    pytest.skip("compiled kernel extension not built", allow_module_level=True)

BACKENDS = [_core_py, cython_core]


def _arrays(obj):
    indptr, indices, values, labels, kind, lam = obj.arrays()
    return indptr, indices, values, labels, kind, lam


@pytest.mark.parametrize("make", [ridge_instance, logistic_instance])
def test_grad_batch_backends_agree(make):
    obj = make(10, 6, seed=50)
    indptr, indices, values, labels, kind, lam = _arrays(obj)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(6)
    rows = np.array([1, 4, 7], dtype=np.int64)
    w = rng.random(3)
    outs = [m.grad_batch(indptr, indices, values, labels, kind, lam, x, rows, w)
            for m in BACKENDS]
    np.testing.assert_allclose(outs[0], outs[1], atol=1e-13)
    # and both equal the weighted sum of component gradients
    manual = sum(w[k] * obj.component_gradient(i, x) for k, i in enumerate(rows))
    np.testing.assert_allclose(outs[0], manual, atol=1e-12)


def test_sgd_step_is_gradient_step():
    obj = ridge_instance(8, 4, seed=51)
    indptr, indices, values, labels, kind, lam = _arrays(obj)
    rng = np.random.default_rng(1)
    x0 = rng.standard_normal(4)
    rows = np.array([0, 5], dtype=np.int64)
    w = np.array([0.5, 0.25])
    for mod in BACKENDS:
        x = x0.copy()
        mod.sgd_step(indptr, indices, values, labels, kind, lam, x, rows, w, 0.1)
        g = mod.grad_batch(indptr, indices, values, labels, kind, lam, x0, rows, w)
        np.testing.assert_allclose(x, x0 - 0.1 * g, atol=1e-14)


@pytest.mark.parametrize("make", [ridge_instance, logistic_instance])
def test_tracked_step_backends_agree(make):
    obj = make(12, 5, seed=52)
    indptr, indices, values, labels, kind, lam = _arrays(obj)
    part_id = np.array([0] * 6 + [1] * 6, dtype=np.int64)
    rng = np.random.default_rng(2)
    x0 = rng.standard_normal(5)
    rows = np.array([2, 3, 9], dtype=np.int64)
    w = rng.random(3)
    states = []
    for mod in BACKENDS:
        x = x0.copy()
        stored = np.zeros((12, 5))
        h = np.zeros(12)
        sums = np.zeros((2, 5))
        sh = np.zeros(2)
        mod.tracker_refresh(indptr, indices, values, labels, kind, lam, x,
                            stored, h, part_id, sums, sh)
        mod.sgd_step_tracked(indptr, indices, values, labels, kind, lam, x,
                             rows, w, 0.05, stored, h, part_id, sums, sh)
        states.append((x, stored, h, sums, sh))
    for a, b in zip(states[0], states[1]):
        np.testing.assert_allclose(a, b, atol=1e-13)
    # tracker h stays consistent with stored gradients
    x, stored, h, sums, sh = states[0]
    np.testing.assert_allclose(h, np.einsum("ij,ij->i", stored, stored), atol=1e-12)
    np.testing.assert_allclose(sums, [stored[:6].sum(0), stored[6:].sum(0)], atol=1e-11)


def test_partial_shuffle_backends_identical():
    u = np.random.default_rng(3).random(4)
    perms = []
    for mod in BACKENDS:
        perm = np.arange(10, dtype=np.int64)
        mod.partial_shuffle(perm, 4, u.copy())
        perms.append(perm.copy())
    np.testing.assert_array_equal(perms[0], perms[1])


def test_partial_shuffle_uniform_subsets():
    # frequencies of each 2-subset of 4 under repeated prefix shuffles
    from collections import Counter
    rng = np.random.default_rng(4)
    counts = Counter()
    N = 60_000
    perm = np.arange(4, dtype=np.int64)
    for _ in range(N):
        _core_py.partial_shuffle(perm, 2, rng.random(2))
        counts[tuple(sorted(perm[:2]))] += 1
    assert len(counts) == 6
    p = 1 / 6
    sigma = np.sqrt(p * (1 - p) / N)
    for key, c in counts.items():
        assert abs(c / N - p) <= 4 * sigma, key


def test_backend_selection_roundtrip():
    prev = kernels.backend_name()
    other = "python" if prev == "cython" else "cython"
    try:
        assert kernels.set_backend(other) == prev
        assert kernels.backend_name() == other
    finally:
        kernels.set_backend(prev)
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_runs_agree_across_backends():
    """Same seed, same draws; trajectories match to float-reordering noise."""
    from adabatch import RunConfig, run_adaptive, single_partition, smoothness_profile, solve_reference
    obj = ridge_instance(20, 5, seed=53, lam=0.4, noise=0.1, x_scale=0.4)
    part = single_partition(20)
    prof = smoothness_profile(obj, part)
    x_star = solve_reference(obj, tol=1e-12)
    cfg = RunConfig(epsilon=1e-3, cap=0.05, seed=8, max_epochs=30)
    results = {}
    prev = kernels.backend_name()
    try:
        for name in kernels.available_backends():
            kernels.set_backend(name)
            results[name] = run_adaptive(obj, part, "nice", cfg, x_star, prof)
    finally:
        kernels.set_backend(prev)
    a, b = results["python"], results["cython"]
    assert [r.tau for r in a.trace] == [r.tau for r in b.trace]
    np.testing.assert_allclose(a.x_final, b.x_final, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose([r.rel_error for r in a.trace],
                               [r.rel_error for r in b.trace], rtol=1e-7, atol=1e-12)
