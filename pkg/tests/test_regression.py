import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbsde_pricing.contracts import Optionality
from fbsde_pricing.errors import DegenerateDesign, InsufficientPoints
from fbsde_pricing.regression import (ExerciseState, RegressionFit, apply_exercise, conditional_expectation,
                                      design_matrix, exercise_decision, fit_for_event, fit_quadratic)


def _const_fit(value):
    return RegressionFit(np.array([value, 0.0, 0.0]), 0.0, 3)


def test_exact_quadratic():
    s = np.linspace(0.5, 1.5, 40)
    fit = fit_quadratic(s, 1 + 2 * s + 3 * s**2)
    np.testing.assert_allclose(fit.coefficients, [1, 2, 3], atol=1e-10)
    assert fit.residual_variance == pytest.approx(0, abs=1e-20)


def test_constant_data():
    fit = fit_quadratic(np.linspace(0, 2, 9), np.full(9, 7.0))
    np.testing.assert_allclose(fit.coefficients, [7, 0, 0], atol=1e-12)


def test_noisy_quadratic_against_closed_form_ols():
    rng = np.random.default_rng(17)
    s = rng.uniform(0.5, 1.5, 10_000)
    truth = np.array([0.4, -1.0, 2.0])
    y = truth[0] + truth[1] * s + truth[2] * s**2 + rng.normal(0, 0.1, s.size)
    fit = fit_quadratic(s, y)
    X = np.vander(s, 3, increasing=True)
    xtx_inv = np.linalg.inv(X.T @ X)
    oracle = xtx_inv @ X.T @ y
    np.testing.assert_allclose(fit.coefficients, oracle, rtol=1e-8)
    se = 0.1 * np.sqrt(np.diag(xtx_inv))
    assert np.all(np.abs(fit.coefficients - truth) < 3 * se)
    assert fit.residual_variance == pytest.approx(0.01, rel=0.05)


@pytest.mark.parametrize("coef, s, want", [((1, 2, 3), 0.0, 1), ((1, 2, 3), 1.0, 6), ((0, 0, 0), 4.2, 0)])
def test_conditional_expectation(coef, s, want):
    assert conditional_expectation(RegressionFit(np.array(coef, float), 0.0, 3), s) == want


def test_errors():
    with pytest.raises(InsufficientPoints):
        fit_quadratic([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(InsufficientPoints):
        fit_quadratic([1.0, 2.0, 3.0, 4.0], [1.0] * 4, mask=[True, True, False, False])
    with pytest.raises(DegenerateDesign):
        fit_quadratic([1.0] * 5, [1.0, 2.0, 3.0, 4.0, 5.0])
    with pytest.raises(DegenerateDesign):
        fit_quadratic([1.0, 1.0, 2.0, 2.0], [1.0, 2.0, 3.0, 4.0])
    assert fit_for_event(np.ones(5), np.arange(5.0), np.ones(5, bool)) is None


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_other_orders_recover_polynomials(order):
    s = np.linspace(0.2, 2.0, 30)
    coef = np.arange(1.0, order + 2)
    fit = fit_quadratic(s, design_matrix(s, order) @ coef, order=order)
    np.testing.assert_allclose(fit.coefficients, coef, atol=1e-8)


def test_mask_restricts_design():
    s = np.linspace(0, 1, 20)
    y = 1 + s**2
    y[:5] = 100.0
    mask = np.arange(20) >= 5
    np.testing.assert_allclose(fit_quadratic(s, y, mask).coefficients, [1, 0, 1], atol=1e-10)


@given(st.integers(0, 10_000))
def test_residuals_orthogonal(seed):
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.3, 1.7, 50)
    y = rng.normal(size=50) + s**2
    fit = fit_quadratic(s, y)
    X = design_matrix(s)
    r = y - X @ fit.coefficients
    dots = X.T @ r
    assert np.all(np.abs(dots) <= 1e-8 * np.linalg.norm(X, axis=0) * np.linalg.norm(y))


@pytest.mark.parametrize("owner, expected, call, reset", [
    (Optionality.HOLDER, 5.0, 6.0, True),
    (Optionality.HOLDER, 6.0, 5.0, False),
    (Optionality.ISSUER, 1.05, 1.00, True),
    (Optionality.ISSUER, 0.95, 1.00, False),
])
def test_exercise_rule(owner, expected, call, reset):
    state = ExerciseState(np.zeros(1), np.array([7.5]), np.array([call]), owner)
    out = apply_exercise(state, _const_fit(expected))
    assert out[0] == (call if reset else 7.5)


def test_reset_uses_actual_call_value_and_mask():
    state = ExerciseState(np.zeros(3), np.array([1.0, 2.0, 3.0]), np.array([9.0, 8.0, 7.0]),
                          Optionality.HOLDER, mask=np.array([True, False, True]))
    np.testing.assert_array_equal(apply_exercise(state, _const_fit(5.0)), [9.0, 2.0, 7.0])


def test_infinite_call_values():
    s = np.linspace(0.5, 1.5, 10)
    vals = s**2
    fit = fit_quadratic(s, vals)
    never = ExerciseState(s, vals, np.full(10, -np.inf), Optionality.HOLDER)
    always = ExerciseState(s, vals, np.full(10, np.inf), Optionality.HOLDER)
    assert not exercise_decision(never, fit).any()
    assert exercise_decision(always, fit).all()


@given(st.integers(0, 10_000), st.floats(1e-3, 1e3), st.sampled_from([Optionality.HOLDER, Optionality.ISSUER]))
def test_decision_scale_invariant(seed, lam, owner):
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.5, 1.5, 200)
    vals = np.maximum(s - 1, 0) + rng.normal(0, 0.05, 200)
    calls = np.maximum(s - 0.98, 0)
    base = exercise_decision(ExerciseState(s, vals, calls, owner), fit_quadratic(s, vals))
    scaled = exercise_decision(ExerciseState(s, lam * vals, lam * calls, owner), fit_quadratic(s, lam * vals))
    # ties at the boundary may flip under rounding
    assert np.mean(base != scaled) <= 0.01
