import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbsde_pricing.errors import ConfigError, NotPositiveDefinite
from fbsde_pricing.market import (Asset, MarketConfig, Scheme, TimeGrid, cholesky_factor, simulate_paths,
                                  simulate_states_at, table1_market, uniform_correlation)

from conftest import zero_vol


def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky_factor(np.eye(3)), np.eye(3))


def test_cholesky_two_by_two():
    L = cholesky_factor([[1, 0.3], [0.3, 1]])
    np.testing.assert_allclose(L, [[1, 0], [0.3, np.sqrt(0.91)]], atol=1e-15)
    assert L[1, 1] == pytest.approx(0.953939, abs=1e-6)


def test_cholesky_singular():
    with pytest.raises(NotPositiveDefinite):
        cholesky_factor([[1, 1.0], [1.0, 1]])


@given(st.integers(1, 12), st.floats(-0.08, 0.95))
def test_cholesky_reconstructs(d, rho):
    corr = uniform_correlation(d, rho)
    L = cholesky_factor(corr)
    assert np.allclose(L, np.tril(L))
    assert np.all(np.diag(L) > 0)
    np.testing.assert_allclose(L @ L.T, corr, atol=1e-12, rtol=0)


@pytest.mark.parametrize("assets, corr, field", [
    ((Asset(0.0, 0.0, 0.2),), np.eye(1), "spot"),
    ((Asset(100.0, 0.0, 0.0),), np.eye(1), "vol"),
    ((Asset(1, 0, 0.2),) * 2, [[1, 0.3], [0.2, 1]], "correlation"),
    ((Asset(1, 0, 0.2),) * 2, [[1, 0.3], [0.3, 0.9]], "correlation"),
    ((Asset(1, 0, 0.2),) * 2, [[1, 1.0], [1.0, 1]], "correlation"),
    ((Asset(1, 0, 0.2),) * 3, [[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1]], "correlation"),
])
def test_market_invariants(assets, corr, field):
    with pytest.raises(ConfigError) as info:
        MarketConfig(0.01, assets, corr)
    assert field in info.value.field


def test_time_grid():
    g = TimeGrid(1.0, 100, (25, 50, 75, 100))
    assert g.h == pytest.approx(0.01)
    assert g.index_of(0.25) == 25
    with pytest.raises(ConfigError):
        g.index_of(0.255)
    for bad in [dict(maturity=0, steps=10), dict(maturity=1, steps=0), dict(maturity=1, steps=10, event_indices=(0,)),
                dict(maturity=1, steps=10, event_indices=(5, 3)), dict(maturity=1, steps=10, event_indices=(11,))]:
        with pytest.raises(ConfigError):
            TimeGrid(**bad)


def test_zero_vol_drift_step():
    batch = simulate_paths(zero_vol(), TimeGrid(1.0, 100), 50, seed=3)
    np.testing.assert_allclose(batch.states[:, 1, 0], 100.01, rtol=1e-12)


def test_same_seed_bit_identical(five_stocks):
    g = TimeGrid(1.0, 20)
    a = simulate_paths(five_stocks, g, 300, 7)
    b = simulate_paths(five_stocks, g, 300, 7)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.increments, b.increments)


def test_path_independent_of_batch_size(five_stocks):
    g = TimeGrid(1.0, 10)
    big = simulate_paths(five_stocks, g, 500, 7)
    tail = simulate_paths(five_stocks, g, 100, 7, first_path=400)
    np.testing.assert_array_equal(big.states[400:], tail.states)
    chunked, _ = simulate_states_at(five_stocks, g, 500, 7, [0, 5, 10], chunk_size=128)
    np.testing.assert_array_equal(chunked, big.states[:, [0, 5, 10], :])


def test_euler_recursion(five_stocks):
    g = TimeGrid(1.0, 10)
    b = simulate_paths(five_stocks, g, 20, 1)
    x, dw = b.states, b.increments
    expected = x[:, :-1] + (five_stocks.rate - five_stocks.dividends) * x[:, :-1] * g.h \
        + five_stocks.vols * x[:, :-1] * dw
    np.testing.assert_allclose(x[:, 1:], expected, rtol=1e-14)
    np.testing.assert_array_equal(x[:, 0], np.broadcast_to(five_stocks.spots, (20, 5)))


def test_log_euler_stays_positive(stock1):
    b = simulate_paths(stock1, TimeGrid(1.0, 10), 1000, 1, scheme=Scheme.LOG_EULER)
    assert np.all(b.states > 0)


def test_martingale_million_paths(stock1):
    g = TimeGrid(1.0, 100)
    m = 1_000_000
    x, negatives = simulate_states_at(stock1, g, m, 2024, [100])
    ratio = x[:, 0, 0] * np.exp(-(0.01 - 0.03)) / 100.0
    assert np.all(np.isfinite(ratio)) and negatives == 0
    assert abs(ratio.mean() - 1.0) < 3 * ratio.std() / np.sqrt(m)


def test_increment_moments_and_correlation():
    market = table1_market(2)
    g = TimeGrid(1.0, 4)
    b = simulate_paths(market, g, 250_000, 5)
    dw = b.increments.reshape(-1, 2)
    n = dw.shape[0]
    assert np.all(np.abs(dw.mean(axis=0)) < 5 * np.sqrt(g.h / n))
    assert np.all(np.abs(dw.var(axis=0) - g.h) < 5 * g.h * np.sqrt(2 / n))
    assert np.corrcoef(dw.T)[0, 1] == pytest.approx(0.3, abs=0.01)


def test_weak_convergence_in_steps(stock1):
    prices = []
    for n in (50, 100):
        x, _ = simulate_states_at(stock1, TimeGrid(1.0, n), 200_000, 11, [n])
        pay = np.maximum(x[:, 0, 0] - 100, 0) * np.exp(-0.01)
        prices.append((pay.mean(), pay.std() / np.sqrt(pay.size)))
    (p1, s1), (p2, s2) = prices
    assert abs(p1 - p2) < 4 * np.hypot(s1, s2)


def test_table1_wraps_after_ten():
    m = table1_market(12)
    assert m.assets[10] == m.assets[0] and m.assets[11] == m.assets[1]
    assert m.correlation[0, 11] == 0.3
