"""Forward DNN, backward DNN and least-square backward DNN FBSDE solvers.

Pricing driver is ``f = -r Y``. Networks see ``(X_i / X_0 - 1) / vol`` per
asset and their output is scaled by ``vol_j * value_scale``, so both sides
of every network are O(1).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .autograd import Tensor, compute_gradients, where
from .contracts import Optionality
from .errors import ConfigError, ContractNotSupported, NumericalFailure
from .market import simulate_paths
from .nn import AdamState, SubNetworkStack, adam_update, layer_sizes
from .regression import ExerciseState, exercise_decision, fit_for_event
from .rng import PILOT_STREAM, VALIDATION_STREAM


@dataclass(frozen=True)
class Driver:
    """Backward-equation drift ``f(t, x, y, z)`` and its derivative in ``y``."""

    f: Callable
    dfdy: Callable


def pricing_driver(rate):
    return Driver(lambda t, x, y, z: -rate * y, lambda t, x, y, z: -rate + 0.0 * y)


def backward_step(y_next, z, dw, rate, h):
    """``Y_i = (Y_{i+1} - Z . dW) / (1 + r h)``, exact for the pricing driver."""
    zdw = np.sum(np.asarray(z) * np.asarray(dw), axis=-1)
    return (np.asarray(y_next) - zdw) / (1.0 + rate * h)


def backward_step_general(y_next, z, dw, h, driver, t=0.0, x=None):
    """First-order Taylor step for a general driver, linearized about ``Y_{i+1}``."""
    zdw = np.sum(np.asarray(z) * np.asarray(dw), axis=-1)
    f = driver.f(t, x, y_next, z)
    dfdy = driver.dfdy(t, x, y_next, z)
    return y_next + (f * h - zdw) / (1.0 - dfdy * h)


def forward_step(y, z, dw, h, driver, t=0.0, x=None):
    zdw = np.sum(np.asarray(z) * np.asarray(dw), axis=-1)
    return y - driver.f(t, x, y, z) * h + zdw


def loss_forward(y_terminal, payoffs):
    """Mean squared terminal mismatch."""
    diff = y_terminal - payoffs
    return (diff * diff).mean()


def loss_backward(y_initial):
    """Population variance of the per-path initial values."""
    n = y_initial.shape[0]
    if n < 2:
        raise ValueError("need at least two paths")
    dev = y_initial - y_initial.mean()
    return (dev * dev).mean()


@dataclass(frozen=True)
class TrainingProtocol:
    iterations: int = 5000
    validate_every: int = 100
    select_count: int = 10
    batch_size: int = 5000
    seed: int = 0
    learning_rate: float = 5e-3
    activation: str = "tanh"
    basis_order: int = 2
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("iterations", "validate_every", "select_count", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError("must be >= 1", f"protocol.{name}")
        if self.batch_size < 2:
            raise ConfigError("need at least 2 paths", "protocol.batch_size")
        if self.select_count > self.snapshots:
            raise ConfigError(f"cannot select {self.select_count} of {self.snapshots} snapshots",
                              "protocol.select_count")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64", "protocol.dtype")

    @property
    def snapshots(self):
        return self.iterations // self.validate_every


PRESETS = {
    "full": dict(iterations=5000, validate_every=100, select_count=10),
    "efficiency": dict(iterations=500, validate_every=10, select_count=10),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", "protocol.preset")
    return TrainingProtocol(**{**PRESETS[name], **overrides})


@dataclass(frozen=True)
class Snapshot:
    iteration: int
    loss: float
    price: float


@dataclass
class SolverReport:
    method: str
    price: float
    dispersion: float
    loss_history: np.ndarray
    validation_history: list
    selected: list
    wall_clock_seconds: float
    seed: int
    negative_states: int = 0


def select_and_report(history, select_count):
    """Mean and standard deviation over the ``select_count`` lowest-loss snapshots.

    Ties are broken by earliest iteration. Returns ``(price, dispersion, chosen)``.
    """
    if not history:
        raise ValueError("validation history is empty")
    if not 1 <= select_count <= len(history):
        raise ValueError(f"select_count must be in 1..{len(history)}")
    chosen = sorted(history, key=lambda s: (s.loss, s.iteration))[:select_count]
    prices = np.array([s.price for s in chosen])
    dispersion = float(prices.std(ddof=1)) if prices.size > 1 else 0.0
    return float(prices.mean()), dispersion, chosen


class _Problem:
    """Constants shared by every pass over a path batch."""

    def __init__(self, market, grid, contract, protocol):
        if contract.dims != market.dims:
            raise ConfigError(f"contract has {contract.dims} assets, market has {market.dims}", "contract")
        self.market, self.grid, self.contract, self.protocol = market, grid, contract, protocol
        self.n = grid.steps
        self.events = list(contract.early_events(self.n))
        self.spots = market.spots
        self.out_scale = market.vols * contract.value_scale(market.spots)
        self.growth = 1.0 + market.rate * grid.h
        self.dtype = np.dtype(protocol.dtype)

    # network layout is (steps, assets, paths)
    def inputs(self, batch, start, stop):
        x = (batch.states[:, start:stop, :] / self.spots - 1.0) / self.market.vols
        return np.ascontiguousarray(x.transpose(1, 2, 0), dtype=self.dtype)

    def increments(self, batch, start, stop):
        return batch.increments[:, start:stop, :].transpose(1, 2, 0)

    def simulate(self, substream, size=None):
        return simulate_paths(self.market, self.grid, size or self.protocol.batch_size,
                              self.protocol.seed, substream)


def _reset_at_event(problem, k, y_disc, levels, decisions=None):
    """Apply the regression-based exercise/call decision at event index ``k``.

    ``y_disc`` is the per-path value discounted to time 0. The decision is
    computed from plain values; gradients pass through the kept branch only.
    A mask already present in ``decisions[k]`` is reused instead of refitting.
    """
    contract = problem.contract
    d_k = problem.growth ** (-k)
    cash = contract.event_cashflow(k, levels)
    if decisions is not None and k in decisions:
        decide = decisions[k]
    else:
        values = np.asarray(y_disc.data, dtype=float) / d_k
        s = contract.regressor(levels, problem.spots)
        mask = contract.decision_mask(levels)
        fit = fit_for_event(s, values, mask, problem.protocol.basis_order)
        decide = np.zeros(values.shape, dtype=bool)
        if fit is not None:
            state = ExerciseState(s, values, cash.call_value, cash.holder_optionality, mask)
            decide = exercise_decision(state, fit)
        if decisions is not None:
            decisions[k] = decide
    if np.any(decide):
        y_disc = where(decide, d_k * cash.call_value, y_disc)
    if np.any(cash.coupon):
        y_disc = y_disc + d_k * cash.coupon
    return y_disc


def backward_pass(problem, stack, batch, decisions=None):
    """Per-path ``Y_0`` by backward propagation with event resets (a Tensor).

    Values are carried discounted to time 0, where the step becomes
    ``Y~_i = Y~_{i+1} - (1 + r h)^{-(i+1)} Z_i . dW_i``. Pass a dict as
    ``decisions`` to record the exercise masks, or to hold them fixed on a
    later call.
    """
    n = problem.n
    disc = problem.growth ** -np.arange(1, n + 1)
    scale = disc[:, None, None] * problem.out_scale[None, :, None]
    weighted = problem.increments(batch, 0, n) * scale
    z = stack(problem.inputs(batch, 0, n))
    contrib = (z * weighted).sum(axis=1)
    y = Tensor(problem.growth ** (-n) * problem.contract.terminal_payoff(batch.states[:, n, :]))
    bounds = [0] + problem.events + [n]
    for seg in range(len(bounds) - 1, 0, -1):
        a, b = bounds[seg - 1], bounds[seg]
        part = contrib.sum(axis=0) if (a, b) == (0, n) else contrib[a:b].sum(axis=0)
        y = y - part
        if a > 0:
            y = _reset_at_event(problem, a, y, batch.states[:, a, :], decisions)
    return y


def forward_pass(problem, stack, batch):
    """Per-path ``Y_N`` propagated forward from the trainable ``Y_0``, ``Z_0``."""
    n = problem.n
    growth = problem.growth ** (n - 1 - np.arange(n))
    dw = problem.increments(batch, 0, n) * (growth[:, None, None] * problem.out_scale[None, :, None])
    y0, z0 = stack.extras["y0"], stack.extras["z0"]
    y = y0 * problem.growth**n + z0 @ dw[0]
    if n > 1:
        z = stack(problem.inputs(batch, 1, n))
        y = y + (z * dw[1:]).sum(axis=1).sum(axis=0)
    return y


def _check_finite(value, what):
    if not np.all(np.isfinite(value)):
        raise NumericalFailure(f"non-finite {what}")


def _train(problem, stack, objective, snapshot, method):
    protocol = problem.protocol
    start = time.perf_counter()
    params = stack.parameters
    adam = AdamState(learning_rate=protocol.learning_rate)
    validation = problem.simulate(VALIDATION_STREAM)
    losses = np.empty(protocol.iterations)
    history = []
    negatives = validation.negative_states
    for it in range(protocol.iterations):
        batch = problem.simulate(it)
        negatives += batch.negative_states
        loss = objective(batch)
        _check_finite(loss.data, "training loss")
        grads = compute_gradients(loss, params)
        adam_update(params, grads, adam)
        losses[it] = float(loss.data)
        if (it + 1) % protocol.validate_every == 0:
            val_loss, price = snapshot(validation)
            _check_finite([val_loss, price], "validation price")
            history.append(Snapshot(it + 1, val_loss, price))
    price, dispersion, chosen = select_and_report(history, protocol.select_count)
    return SolverReport(method, price, dispersion, losses, history, [s.iteration for s in chosen],
                        time.perf_counter() - start, protocol.seed, negatives)


def lsq_backward_dnn_solve(market, grid, contract, protocol=TrainingProtocol()):
    """Least-square backward DNN price.

    Each iteration draws a fresh batch, propagates ``Y`` backward from the
    payoff with regression-based resets at events, and takes an Adam step on
    the variance of ``Y_0``. Snapshots price a fixed validation batch.
    """
    problem = _Problem(market, grid, contract, protocol)
    stack = SubNetworkStack(layer_sizes(market.dims), grid.steps, protocol.seed,
                            protocol.activation, problem.dtype)

    def objective(batch):
        return loss_backward(backward_pass(problem, stack, batch))

    def snapshot(batch):
        y0 = backward_pass(problem, stack, batch).data
        return float(y0.var()), float(y0.mean())

    return _train(problem, stack, objective, snapshot, "lsq_backward_dnn")


def pilot_price(problem, num_paths=1000):
    batch = problem.simulate(PILOT_STREAM, num_paths)
    payoff = problem.contract.terminal_payoff(batch.states[:, -1, :])
    return float(np.exp(-problem.market.rate * problem.grid.maturity) * payoff.mean())


def forward_dnn_solve(market, grid, contract, protocol=TrainingProtocol()):
    """Forward DNN price: train ``Y_0``, ``Z_0`` and the step networks so the
    forward-propagated ``Y_N`` matches the payoff."""
    if contract.optionality is not Optionality.NONE:
        raise ContractNotSupported(
            f"forward_dnn cannot price early-exercise contracts ({contract.label})", "method")
    problem = _Problem(market, grid, contract, protocol)
    rng = np.random.default_rng([protocol.seed, 0x59])
    guess = pilot_price(problem)
    extras = {"y0": rng.uniform(0.8, 1.2) * guess,
              "z0": rng.uniform(-0.1, 0.1, size=market.dims)}
    stack = SubNetworkStack(layer_sizes(market.dims), grid.steps - 1, protocol.seed,
                            protocol.activation, problem.dtype, extras)

    def payoff(batch):
        return problem.contract.terminal_payoff(batch.states[:, -1, :])

    def objective(batch):
        return loss_forward(forward_pass(problem, stack, batch), payoff(batch))

    def snapshot(batch):
        y_n = forward_pass(problem, stack, batch).data
        return float(np.mean((y_n - payoff(batch)) ** 2)), float(stack.extras["y0"].data)

    return _train(problem, stack, objective, snapshot, "forward_dnn")
