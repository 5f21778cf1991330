import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from subgauss.ensembles import GAUSSIAN, RngState, sample_matrix
from subgauss.linalg import (apply, gram_extreme_eigs, jacobi_eigenvalues, power_iteration_top,
                             project_l1_ball)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def l1_projection_oracle(x, radius):
    """Scan all breakpoints |x_i| for the threshold tau of the KKT condition
    sum max(|x_i| - tau, 0) = radius, then soft-threshold."""
    a = np.abs(x)
    if a.sum() <= radius:
        return x.copy()
    pts = np.sort(np.append(a, 0.0))
    f = lambda t: np.maximum(a - t, 0).sum() - radius
    for lo, hi in zip(pts[:-1], pts[1:]):
        if f(lo) >= 0 >= f(hi):
            # f is affine on [lo, hi]
            tau = lo + (hi - lo) * f(lo) / (f(lo) - f(hi)) if f(lo) != f(hi) else lo
            return np.sign(x) * np.maximum(a - tau, 0)
    raise AssertionError("no breakpoint interval brackets the threshold")


def test_apply_examples():
    assert np.array_equal(apply(np.eye(2), np.array([3.0, -1.0])), [3.0, -1.0])
    g = sample_matrix(GAUSSIAN, 3, 5, RngState(4))
    assert np.array_equal(apply(g, np.zeros(5)), np.zeros(3))
    assert np.array_equal(apply(g, np.eye(5)[2]), g[:, 2])
    with pytest.raises(ValueError):
        apply(g, np.zeros(4))


@given(st.integers(0, 1000), finite, finite)
@settings(max_examples=50, deadline=None)
def test_apply_is_linear(seed, a, b):
    r = RngState(seed)
    g = sample_matrix(GAUSSIAN, 6, 9, r)
    x, y = r.split(1).normal(9), r.split(2).normal(9)
    lhs = apply(g, a * x + b * y)
    rhs = a * apply(g, x) + b * apply(g, y)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (1 + abs(a) + abs(b)) * 10)


def test_apply_uses_pairwise_sums():
    # a plain left-to-right sum of 1 followed by 2^20 copies of 2^-53 stays at 1;
    # pairwise summation recovers most of the added mass
    n = 2**20 + 1
    x = np.full(n, 2.0**-53)
    x[0] = 1.0
    out = apply(np.ones((1, n)), x)[0]
    assert out > 1.0 + 2**-34


def test_gram_single_normalized_column():
    k = 5
    g = np.zeros((k, 3))
    g[:3, :3] = math.sqrt(k) * np.eye(3)
    assert gram_extreme_eigs(g, [0]) == pytest.approx((1.0, 1.0))


def test_gram_duplicate_columns_are_singular():
    g = sample_matrix(GAUSSIAN, 8, 3, RngState(1))
    g[:, 1] = g[:, 0]
    lo, hi = gram_extreme_eigs(g, [0, 1])
    assert abs(lo) < 1e-10 and hi > 0


def test_gram_two_by_two_closed_form():
    g = sample_matrix(GAUSSIAN, 32, 64, RngState(7))
    G = g[:, :2].T @ g[:, :2] / 32
    a, b, c = G[0, 0], G[0, 1], G[1, 1]
    disc = math.sqrt((a - c) ** 2 + 4 * b * b)
    lo, hi = gram_extreme_eigs(g, [0, 1])
    assert lo == pytest.approx((a + c - disc) / 2, abs=1e-10)
    assert hi == pytest.approx((a + c + disc) / 2, abs=1e-10)


def test_gram_rejects_empty_support():
    with pytest.raises(ValueError):
        gram_extreme_eigs(np.eye(3), [])


def test_jacobi_matches_diagonal_and_trace():
    d = np.array([3.0, -1.0, 2.0])
    assert np.allclose(jacobi_eigenvalues(np.diag(d)), np.sort(d))
    s = sample_matrix(GAUSSIAN, 6, 6, RngState(3))
    a = s + s.T
    ev = jacobi_eigenvalues(a)
    assert ev.sum() == pytest.approx(np.trace(a), abs=1e-10)
    assert (ev**2).sum() == pytest.approx((a * a).sum(), rel=1e-10)
    # each eigenvalue makes A - lambda I singular
    for lam in ev:
        assert abs(np.linalg.det(a - lam * np.eye(6))) < 1e-6 * max(1, abs(lam)) ** 6


@given(st.integers(0, 10**6), st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_gram_brackets_rayleigh_quotients(seed, size):
    r = RngState(seed)
    g = sample_matrix(GAUSSIAN, 10, 12, r)
    support = sorted(np.argsort(r.split(1).uniform(12))[:size])
    lo, hi = gram_extreme_eigs(g, support)
    assert -1e-10 <= lo <= hi
    xs = r.split(2).normal((100, size))
    for x in xs:
        x /= np.linalg.norm(x)
        q = np.sum((g[:, support] @ x) ** 2) / 10
        assert lo - 1e-9 <= q <= hi + 1e-9


def test_project_inside_is_identity():
    x = np.array([0.2, -0.3, 0.1])
    assert np.array_equal(project_l1_ball(x, 1.0), x)


def test_project_along_ray():
    assert np.allclose(project_l1_ball(np.array([2.0, 0.0]), 1.0), [1.0, 0.0])


def test_project_matches_breakpoint_oracle():
    for seed in range(200):
        x = 2 * RngState(seed).normal(10)
        p = project_l1_ball(x, 1.0)
        assert np.max(np.abs(p - l1_projection_oracle(x, 1.0))) <= 1e-10
        assert np.abs(p).sum() <= 1.0 + 1e-12


vectors = arrays(np.float64, st.integers(1, 12), elements=st.floats(-100, 100))


@given(vectors, st.floats(0.01, 50))
@settings(max_examples=150, deadline=None)
def test_projection_properties(x, radius):
    p = project_l1_ball(x, radius)
    assert np.abs(p).sum() <= radius * (1 + 1e-12) + 1e-12
    assert np.allclose(project_l1_ball(p, radius), p, atol=1e-12)
    # variational inequality: <x - p, q - p> <= 0 for every q in the ball,
    # enough to check at the vertices +-radius e_i
    for i in range(x.size):
        for s in (1, -1):
            q = np.zeros(x.size)
            q[i] = s * radius
            assert (x - p) @ (q - p) <= 1e-8 * (1 + np.abs(x).sum()) * radius


@given(vectors, st.floats(0.01, 10), st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_projection_is_nonexpansive(x, radius, seed):
    y = x + RngState(seed).normal(x.size)
    px, py = project_l1_ball(x, radius), project_l1_ball(y, radius)
    assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-9


def test_power_iteration_approaches_top_eigenvalue():
    g = sample_matrix(GAUSSIAN, 20, 40, RngState(2))
    top = np.linalg.svd(g, compute_uv=False)[0] ** 2
    est = power_iteration_top(g, iters=500)
    assert est <= top * (1 + 1e-12)
    assert est == pytest.approx(top, rel=1e-3)
