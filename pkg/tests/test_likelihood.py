import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from credal_decal import (
    DegenerateClass,
    LabeledLogits,
    SingleClassData,
    SolverConfig,
    delta_loglik,
    delta_loglik_1d,
    delta_loglik_grad,
    family_max_1d,
    fit,
    solve_endpoints,
    upper_bound_multivariate,
)
from credal_decal.likelihood import (
    _thread_count,
    delta_loglik_1d_deriv,
    delta_loglik_hess,
    log_softmax_shift,
)

from conftest import random_labeled
from oracles import naive_delta, p_k as _p_k, refined_grid_upper as _refined_grid_upper

# root of t - 2 ln((1 + e^t) / 2) = -1, 40-digit mpmath findroot (frozen)
TOY_T_AT_INV_E = 2.1700770038967755


def closed_form(t):
    return t - 2.0 * math.log((1.0 + math.exp(t)) / 2.0)


def test_log_softmax_shift_examples():
    np.testing.assert_allclose(log_softmax_shift([0, 0], [0, 0]), np.log([0.5, 0.5]))
    np.testing.assert_allclose(log_softmax_shift([0, 0], [math.log(3), 0]), np.log([0.75, 0.25]))
    out = log_softmax_shift([1000.0, 0.0], [0.0, 0.0])
    assert np.all(np.isfinite(out))
    assert out[0] == pytest.approx(0.0, abs=1e-300)
    assert out[1] == pytest.approx(-1000.0)


def test_frozen_toy_root_matches_brentq():
    root = brentq(lambda t: closed_form(t) + 1.0, 0.0, 10.0, xtol=1e-15)
    assert root == pytest.approx(TOY_T_AT_INV_E, abs=1e-13)


def test_delta_zero_shift_and_translation(toy, rng):
    d = random_labeled(rng, 30, 4)
    assert delta_loglik(d, np.zeros(4)) == 0.0
    assert delta_loglik(d, np.full(4, 5.0)) == pytest.approx(0.0, abs=1e-12)
    c = rng.standard_normal(4)
    assert delta_loglik(d, c + 3.0) == pytest.approx(delta_loglik(d, c), abs=1e-10)


@pytest.mark.parametrize("t", [-7.0, -1.0, -0.1, 0.3, 2.0, 12.0])
def test_delta_toy_closed_form(toy, t):
    assert delta_loglik(toy, [t, 0.0]) == pytest.approx(closed_form(t), abs=1e-12)
    assert delta_loglik_1d(toy, 0, t) == pytest.approx(closed_form(t), abs=1e-12)
    assert delta_loglik_1d(toy, 0, -t) == pytest.approx(delta_loglik_1d(toy, 0, t), abs=1e-12)


def test_delta_matches_naive_summation(rng):
    d = random_labeled(rng, 40, 3)
    for _ in range(10):
        c = 2 * rng.standard_normal(3)
        ref = naive_delta(d.z.tolist(), d.labels.tolist(), c.tolist())
        assert delta_loglik(d, c) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_one_dimensional_slice_agrees_with_full(rng):
    d = random_labeled(rng, 60, 5)
    for k in range(5):
        for t in (-3.0, -0.5, 0.7, 4.0):
            e = np.zeros(5)
            e[k] = t
            assert delta_loglik_1d(d, k, t) == pytest.approx(delta_loglik(d, e), abs=1e-9)


def test_gradient_toy_is_zero(toy):
    np.testing.assert_allclose(delta_loglik_grad(toy, [0.0, 0.0]), [0.0, 0.0], atol=1e-15)


def test_gradient_finite_differences_and_sum(rng):
    h = 1e-5
    for _ in range(20):
        d = random_labeled(rng, 50, 4)
        c = rng.standard_normal(4)
        g = delta_loglik_grad(d, c)
        assert abs(g.sum()) < 1e-9
        fd = np.empty(4)
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            fd[k] = (delta_loglik(d, c + e) - delta_loglik(d, c - e)) / (2 * h)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1.0)


def test_hessian_is_negative_semidefinite_with_ones_in_kernel(rng):
    d = random_labeled(rng, 50, 4)
    H = delta_loglik_hess(d, rng.standard_normal(4))
    assert np.max(np.linalg.eigvalsh(H)) < 1e-10
    np.testing.assert_allclose(H @ np.ones(4), 0.0, atol=1e-10)


def test_1d_derivative_central_difference(rng):
    d = random_labeled(rng, 30, 3)
    for t in (-2.0, 0.0, 1.5):
        fd = (delta_loglik_1d(d, 1, t + 1e-6) - delta_loglik_1d(d, 1, t - 1e-6)) / 2e-6
        assert delta_loglik_1d_deriv(d, 1, t) == pytest.approx(fd, abs=1e-6)


def test_absent_class_slice_has_finite_limit():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((20, 3))
    y = rng.integers(1, 3, size=20)  # classes 1 and 2 only
    d = LabeledLogits.from_one_based(z, y)
    ts = np.linspace(0.1, 20, 50)
    vals = [delta_loglik_1d(d, 2, t) for t in ts]
    assert np.all(np.diff(vals) < 0)
    a, b = delta_loglik_1d(d, 2, -50.0), delta_loglik_1d(d, 2, -100.0)
    assert 0 < a <= b
    assert b - a < 1e-12


def test_family_max_toy(toy):
    t, v = family_max_1d(toy, 0)
    assert t == 0.0 and v == 0.0


def test_family_max_under_predicted_class():
    rng = np.random.default_rng(11)
    z = rng.standard_normal((200, 3))
    p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    y = np.array([rng.choice(3, p=row) for row in p])
    z[:, 0] -= 1.0
    d = LabeledLogits(z, y)
    t_star, value = family_max_1d(d, 0)
    assert t_star > 0
    grid = np.linspace(-3, 3, 6001)
    scan = [delta_loglik_1d(d, 0, t) for t in grid]
    assert abs(grid[int(np.argmax(scan))] - t_star) <= 1e-3
    assert value >= max(scan) - 1e-9
    assert delta_loglik_1d_deriv(d, 0, t_star - 1) > 0 > delta_loglik_1d_deriv(d, 0, t_star + 1)


def test_family_max_degenerate_class():
    d = LabeledLogits.from_one_based([[0, 0, 0], [1, 0, 0]], [1, 2])
    with pytest.raises(DegenerateClass):
        family_max_1d(d, 2)


def test_endpoints_toy_inverse_e(toy):
    ep = solve_endpoints(toy, 0, math.exp(-1.0))
    assert ep.t_plus == pytest.approx(TOY_T_AT_INV_E, abs=1e-10)
    assert ep.t_minus == pytest.approx(-TOY_T_AT_INV_E, abs=1e-10)
    assert abs(closed_form(ep.t_plus) + 1.0) <= 1e-10 * toy.n


def test_endpoints_special_alphas(toy):
    ep = solve_endpoints(toy, 0, 0.0)
    assert (ep.t_minus, ep.t_plus) == (-math.inf, math.inf)
    ep = solve_endpoints(toy, 1, 1.0, mode="family-mle")
    assert ep.t_minus == ep.t_plus == 0.0
    ep = solve_endpoints(toy, 1, 1.0, mode="base")
    assert ep.t_minus == pytest.approx(0.0, abs=1e-6) and ep.t_plus == pytest.approx(0.0, abs=1e-6)


def test_endpoints_are_inner_side(rng):
    d = random_labeled(rng, 100, 4)
    for k in range(4):
        ep = solve_endpoints(d, k, 0.3)
        for t in (ep.t_minus, ep.t_plus):
            assert delta_loglik_1d(d, k, t) >= math.log(0.3)
            assert abs(delta_loglik_1d(d, k, t) - math.log(0.3)) <= 1e-10 * d.n


def test_absent_class_gets_infinite_lower_end():
    d = LabeledLogits.from_one_based([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [1, 2, 1])
    ep = solve_endpoints(d, 2, 0.5)
    assert ep.t_minus == -math.inf and math.isfinite(ep.t_plus)
    assert ep.residual_minus is None


def test_family_mode_absent_class_supremum_side():
    d = LabeledLogits.from_one_based([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [1, 2, 1])
    ep = solve_endpoints(d, 2, 0.5, mode="family-mle")
    assert ep.t_minus == -math.inf and math.isfinite(ep.t_plus)
    assert ep.t_plus < solve_endpoints(d, 2, 0.5).t_plus


def test_family_mode_contains_maximizer(rng):
    d = random_labeled(rng, 80, 3)
    for k in range(3):
        t_star, _ = family_max_1d(d, k)
        ep = solve_endpoints(d, k, 0.7, mode="family-mle")
        assert ep.t_minus < t_star < ep.t_plus


def test_fit_nested_and_counts(rng):
    d = random_labeled(rng, 300, 4)
    m = fit(d, [0.9, 0.5, 0.1])
    assert m.alphas == (0.1, 0.5, 0.9)
    assert m.is_nested()
    assert m.n_root_finds == 2 * 4 * 3
    for (a, k), ep in m.endpoints.items():
        assert ep.residual_minus <= m.tol and ep.residual_plus <= m.tol


def test_fit_family_alpha_one_points(toy):
    m = fit(toy, [1.0], mode="family-mle")
    for k in range(2):
        lo, hi = m.shifts(1.0)
        assert np.all(lo == hi)


def test_fit_zero_alpha_needs_no_root_finds(toy):
    assert fit(toy, [0.0]).n_root_finds == 0


def test_fit_rejects_single_class():
    d = LabeledLogits.from_one_based([[0, 0], [1, 0]], [1, 1])
    with pytest.raises(SingleClassData):
        fit(d, [0.5])


def test_fit_threads_agree(rng, monkeypatch):
    d = random_labeled(rng, 200, 5)
    one = fit(d, [0.2, 0.8], workers=1)
    monkeypatch.setenv("CREDAL_DECAL_THREADS", "4")
    assert _thread_count(None) == 4
    many = fit(d, [0.2, 0.8])
    assert one.endpoints == many.endpoints
    assert many.n_root_finds == one.n_root_finds


def test_saturated_logits_stay_finite():
    z = np.array([[1000.0, 0.0], [0.0, 1000.0], [500.0, 0.0]])
    d = LabeledLogits(z, [0, 1, 1])
    m = fit(d, [0.5])
    lo, hi = m.shifts(0.5)
    assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))


def test_clamp_gives_infinite_side():
    # very flat likelihood: one row, tiny budget
    d = LabeledLogits([[0.0, 0.0], [0.0, 0.0]], [0, 1])
    ep = solve_endpoints(d, 0, 1e-300, cfg=SolverConfig(clamp=50.0))
    assert ep.t_plus == math.inf and ep.t_minus == -math.inf


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    alpha=st.floats(0.01, 0.99),
    K=st.integers(2, 5),
)
def test_endpoint_residual_property(seed, alpha, K):
    rng = np.random.default_rng(seed)
    d = random_labeled(rng, 40, K)
    k = int(rng.integers(K))
    ep = solve_endpoints(d, k, alpha)
    assert ep.t_minus <= 0.0 <= ep.t_plus
    for t in (ep.t_minus, ep.t_plus):
        if math.isfinite(t):
            assert abs(delta_loglik_1d(d, k, t) - math.log(alpha)) <= 1e-10 * d.n


# --- multivariate upper bound ---------------------------------------------


@pytest.mark.parametrize("seed,alpha,k", [(1, 0.5, 0), (2, 0.2, 1), (3, 0.8, 2)])
def test_multivariate_matches_grid_search(seed, alpha, k):
    rng = np.random.default_rng(seed)
    d = random_labeled(rng, 10, 3, scale=1.0)
    z = rng.standard_normal(3)
    value = upper_bound_multivariate(d, z, k, alpha)
    oracle = _refined_grid_upper(d, z, k, alpha)
    assert value >= oracle - 1e-9
    assert abs(value - oracle) <= 1e-3


def test_multivariate_dominates_axis_bound(rng):
    d = random_labeled(rng, 60, 4)
    m = fit(d, [0.3])
    lo, hi = m.shifts(0.3)
    for _ in range(5):
        z = rng.standard_normal(4)
        for k in range(4):
            e = np.zeros(4)
            e[k] = hi[k]
            assert upper_bound_multivariate(d, z, k, 0.3) >= _p_k(z, e, k) - 1e-6


def test_multivariate_family_alpha_one_is_mle_point(rng):
    d = random_labeled(rng, 40, 3)
    z = rng.standard_normal(3)
    v = upper_bound_multivariate(d, z, 0, 1.0, mode="family-mle")
    # the unshifted model is not the family maximizer, so the point value differs from softmax(z)
    v_half = upper_bound_multivariate(d, z, 0, 0.5, mode="family-mle")
    assert 0 < v <= v_half + 1e-9
