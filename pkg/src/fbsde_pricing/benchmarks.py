"""Reference pricers: Black-Scholes, least-squares Monte Carlo, 1D PDE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import ndtr

from .contracts import BermudanBasketCall, CallableYieldNote, Optionality
from .errors import ConfigError, SpotOutsideGrid
from .market import simulate_states_at
from .regression import ExerciseState, exercise_decision, fit_for_event
from .rng import BENCHMARK_STREAM


def black_scholes_call(spot, strike, rate, dividend, vol, maturity):
    """Call on a dividend-paying stock, ``e^{-qT} S N(d1) - e^{-rT} K N(d2)``."""
    sd = vol * np.sqrt(maturity)
    d1 = (np.log(spot / strike) + (rate - dividend) * maturity) / sd + 0.5 * sd
    d2 = d1 - sd
    return spot * np.exp(-dividend * maturity) * ndtr(d1) - strike * np.exp(-rate * maturity) * ndtr(d2)


def black_scholes_delta(spot, strike, rate, dividend, vol, maturity):
    sd = vol * np.sqrt(maturity)
    d1 = (np.log(spot / strike) + (rate - dividend) * maturity) / sd + 0.5 * sd
    return np.exp(-dividend * maturity) * ndtr(d1)


@dataclass(frozen=True)
class MonteCarloResult:
    price: float
    standard_error: float
    num_paths: int
    negative_states: int = 0


def lsq_monte_carlo(market, grid, contract, num_paths, seed, basis_order=2,
                    chunk_size=20_000, substream=BENCHMARK_STREAM):
    """Longstaff-Schwartz price from realized discounted cashflows.

    At each event (latest first) the realized cashflows discounted to the
    event date are regressed on the contract's scalar state over its
    decision mask; decided paths take the call value, others keep their
    realized cashflow. Coupons are added after the decision. Contracts
    without events reduce to plain discounted-payoff Monte Carlo.
    """
    n = grid.steps
    events = list(contract.early_events(n))
    indices = events + [n]
    states, negatives = simulate_states_at(market, grid, num_paths, seed, indices, substream, chunk_size)
    spots = market.spots
    value = contract.terminal_payoff(states[:, -1, :])
    t_next = grid.maturity
    for pos in range(len(events) - 1, -1, -1):
        k = events[pos]
        t_k = k * grid.h
        value = value * np.exp(-market.rate * (t_next - t_k))
        levels = states[:, pos, :]
        cash = contract.event_cashflow(k, levels)
        s = contract.regressor(levels, spots)
        mask = contract.decision_mask(levels)
        fit = fit_for_event(s, value, mask, basis_order)
        if fit is not None:
            state = ExerciseState(s, value, cash.call_value, cash.holder_optionality, mask)
            value = np.where(exercise_decision(state, fit), cash.call_value, value)
        value = value + cash.coupon
        t_next = t_k
    value = value * np.exp(-market.rate * t_next)
    se = float(value.std(ddof=1) / np.sqrt(num_paths))
    return MonteCarloResult(float(value.mean()), se, num_paths, negatives)


@dataclass(frozen=True)
class PdeGrid1D:
    """Log-price grid and time stepping for :func:`crank_nicolson_1d`.

    ``smoothing_steps`` fully implicit sub-steps replace the first
    Crank-Nicolson step after the terminal condition and after each event.
    """

    nodes: int = 801
    width: float = 6.0
    steps_per_interval: int = 100
    smoothing_steps: int = 4
    center: float | None = None

    def __post_init__(self):
        if self.nodes < 5:
            raise ConfigError("need at least 5 nodes", "pde.nodes")
        if self.steps_per_interval < 1:
            raise ConfigError("need at least 1 step per interval", "pde.steps_per_interval")
        if self.smoothing_steps < 0:
            raise ConfigError("smoothing steps must be >= 0", "pde.smoothing_steps")


def _operator_bands(x, vol, rate, dividend):
    dx = x[1] - x[0]
    mu = rate - dividend - 0.5 * vol * vol
    diff = 0.5 * vol * vol / (dx * dx)
    adv = mu / (2.0 * dx)
    return diff - adv, -2.0 * diff - rate, diff + adv


class _Stepper:
    """theta-scheme on interior nodes with linear-in-S far-field conditions."""

    def __init__(self, x):
        self.x = x
        s = np.exp(x)
        w_lo = (s[0] - s[1]) / (s[2] - s[1])
        w_hi = (s[-1] - s[-2]) / (s[-3] - s[-2])
        # V_0 = (1 - w_lo) V_1 + w_lo V_2, V_{n-1} = (1 - w_hi) V_{n-2} + w_hi V_{n-3}
        self.lo = (1.0 - w_lo, w_lo)
        self.hi = (1.0 - w_hi, w_hi)

    def step(self, v, dt, theta, bands):
        a, b, c = bands
        m = v.size - 2
        rhs = v[1:-1].copy()
        if theta < 1.0:
            expl = (1.0 - theta) * dt
            rhs += expl * (a * v[:-2] + b * v[1:-1] + c * v[2:])
        lower = np.full(m, -theta * dt * a)
        diag = np.full(m, 1.0 - theta * dt * b)
        upper = np.full(m, -theta * dt * c)
        # eliminate boundary nodes
        diag[0] += lower[0] * self.lo[0]
        upper[0] += lower[0] * self.lo[1]
        diag[-1] += upper[-1] * self.hi[0]
        lower[-1] += upper[-1] * self.hi[1]
        ab = np.zeros((3, m))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag
        ab[2, :-1] = lower[1:]
        out = np.empty_like(v)
        out[1:-1] = solve_banded((1, 1), ab, rhs)
        out[0] = self.lo[0] * out[1] + self.lo[1] * out[2]
        out[-1] = self.hi[0] * out[-2] + self.hi[1] * out[-3]
        return out


def _cyn_event(contract, position):
    def apply(v, levels):
        called = np.minimum(v, contract.notional)
        return called + contract.coupon(position, levels)
    return apply


def crank_nicolson_1d(market, grid, contract, pde_grid=PdeGrid1D()):
    """Black-Scholes PDE in log-price, solved backward from maturity.

    Events: Bermudan values are floored at intrinsic; CYN values are capped
    at the notional (issuer call) and then receive the coupon.
    """
    if market.dims != 1:
        raise ConfigError(f"the PDE pricer handles one underlier, got {market.dims}", "method")
    spot = float(market.spots[0])
    vol = float(market.vols[0])
    q = float(market.dividends[0])
    r = market.rate
    T = grid.maturity
    center = np.log(spot) if pde_grid.center is None else pde_grid.center
    half = pde_grid.width * vol * np.sqrt(T)
    x = np.linspace(center - half, center + half, pde_grid.nodes)
    if not x[0] < np.log(spot) < x[-1]:
        raise SpotOutsideGrid(f"spot {spot} outside [{np.exp(x[0]):.4g}, {np.exp(x[-1]):.4g}]")
    levels = np.exp(x)[:, None]
    bands = _operator_bands(x, vol, r, q)
    stepper = _Stepper(x)

    n = grid.steps
    events = list(contract.early_events(n))
    updates = {}
    for pos, k in enumerate(events):
        if isinstance(contract, CallableYieldNote):
            updates[k] = _cyn_event(contract, contract.schedule.index(k))
        elif contract.optionality is Optionality.HOLDER:
            updates[k] = lambda v, lv: np.maximum(v, contract.intrinsic(lv))

    v = contract.terminal_payoff(levels).astype(float)
    bounds = [0] + events + [n]
    for seg in range(len(bounds) - 1, 0, -1):
        t_hi, t_lo = bounds[seg] * grid.h, bounds[seg - 1] * grid.h
        steps = pde_grid.steps_per_interval
        dt = (t_hi - t_lo) / steps
        for j in range(steps):
            if j == 0 and pde_grid.smoothing_steps:
                sub = pde_grid.smoothing_steps
                for _ in range(sub):
                    v = stepper.step(v, dt / sub, 1.0, bands)
            else:
                v = stepper.step(v, dt, 0.5, bands)
        k = bounds[seg - 1]
        if k in updates:
            v = updates[k](v, levels)
    return float(np.interp(np.log(spot), x, v))
