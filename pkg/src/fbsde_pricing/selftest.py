"""Quick built-in property checks, runnable without the test suite."""

from __future__ import annotations

import numpy as np

from .autograd import compute_gradients
from .benchmarks import PdeGrid1D, black_scholes_call, black_scholes_delta, crank_nicolson_1d
from .config import TABLE1_JSON, parse_market
from .contracts import BermudanBasketCall, EuropeanBasketCall
from .market import TimeGrid, simulate_paths
from .nn import SubNetworkStack, layer_sizes
from .regression import conditional_expectation, fit_quadratic
from .rng import philox4x32, uniforms
from .solvers import TrainingProtocol, _Problem, backward_pass, backward_step, loss_backward


def _stock1():
    return parse_market({**TABLE1_JSON["market"], "underliers": 1})


def check_philox():
    out = philox4x32(np.zeros(4, np.uint32), np.zeros(2, np.uint32))
    want = np.array([0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8], np.uint32)
    fast = uniforms(7, 3, 16, 5)
    return bool(np.array_equal(out, want) and np.all((fast > 0) & (fast < 1))), "known-answer vector"


def check_black_scholes():
    price = black_scholes_call(100.0, 100.0, 0.01, 0.03, 0.2, 1.0)
    return abs(price - 6.8669) < 1e-3, f"price {price:.6f}"


def check_pde():
    market = _stock1()
    price = crank_nicolson_1d(market, TimeGrid(1.0, 100), EuropeanBasketCall([1.0], 100.0), PdeGrid1D())
    bs = black_scholes_call(100.0, 100.0, 0.01, 0.03, 0.2, 1.0)
    return abs(price / bs - 1) < 1e-3, f"price {price:.6f}"


def check_regression():
    rng = np.random.default_rng(1)
    x = rng.uniform(0.5, 1.5, 200)
    fit = fit_quadratic(x, 0.3 - 1.2 * x + 2.5 * x * x)
    err = np.max(np.abs(fit.coefficients - [0.3, -1.2, 2.5]))
    return err < 1e-10, f"max coefficient error {err:.1e}"


def check_gradients(seeds=5):
    market = _stock1()
    grid = TimeGrid(1.0, 3)
    contract = BermudanBasketCall([1.0], 100.0, (1, 2))
    protocol = TrainingProtocol(iterations=1, validate_every=1, select_count=1, batch_size=8,
                                dtype="float64")
    worst = 0.0
    for seed in range(seeds):
        problem = _Problem(market, grid, contract, TrainingProtocol(**{**vars(protocol), "seed": seed}))
        stack = SubNetworkStack(layer_sizes(1), 3, seed, "tanh", np.float64)
        batch = problem.simulate(0)
        decisions = {}
        loss = loss_backward(backward_pass(problem, stack, batch, decisions))
        grads = compute_gradients(loss, stack.parameters)
        p, g = stack.parameters[0], grads[0]
        idx = np.unravel_index(np.argmax(np.abs(g)), g.shape)
        eps = 1e-6
        saved = p.data[idx]
        vals = []
        for s in (eps, -eps):
            p.data[idx] = saved + s
            vals.append(float(loss_backward(backward_pass(problem, stack, batch, decisions)).data))
        p.data[idx] = saved
        fd = (vals[0] - vals[1]) / (2 * eps)
        worst = max(worst, abs(fd - g[idx]) / max(abs(fd), 1e-12))
    return worst < 1e-5, f"worst relative error {worst:.1e}"


def check_analytic_z():
    market = _stock1()
    grid = TimeGrid(1.0, 100)
    batch = simulate_paths(market, grid, 20000, 11)
    x, dw = batch.states[..., 0], batch.increments[..., 0]
    y = np.maximum(x[:, -1] - 100.0, 0.0)
    for i in range(grid.steps - 1, -1, -1):
        tau = grid.maturity - grid.times[i]
        z = 0.2 * x[:, i] * black_scholes_delta(x[:, i], 100.0, 0.01, 0.03, 0.2, tau)
        y = backward_step(y, z[:, None], dw[:, i, None], 0.01, grid.h)
    bs = black_scholes_call(100.0, 100.0, 0.01, 0.03, 0.2, 1.0)
    err = abs(y.mean() / bs - 1)
    return err < 2e-3, f"Y0 mean {y.mean():.4f}"


CHECKS = {
    "philox known answer": check_philox,
    "black-scholes closed form": check_black_scholes,
    "crank-nicolson european": check_pde,
    "regression exact quadratic": check_regression,
    "gradient vs finite difference": check_gradients,
    "analytic hedge oracle": check_analytic_z,
}


def run_selftest(echo=print):
    ok = True
    for name, check in CHECKS.items():
        passed, detail = check()
        ok &= bool(passed)
        echo(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return ok
