"""Market data and correlated geometric Brownian motion paths."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotPositiveDefinite
from .rng import standard_normals


@dataclass(frozen=True)
class Asset:
    spot: float
    dividend: float
    vol: float


@dataclass(frozen=True)
class MarketConfig:
    """Flat-rate Black-Scholes market on ``d`` correlated assets."""

    rate: float
    assets: tuple[Asset, ...]
    correlation: np.ndarray

    def __post_init__(self):
        assets = tuple(self.assets)
        object.__setattr__(self, "assets", assets)
        corr = np.array(self.correlation, dtype=float)
        corr.setflags(write=False)
        object.__setattr__(self, "correlation", corr)
        d = len(assets)
        if d == 0:
            raise ConfigError("at least one asset is required", "market.assets")
        for i, a in enumerate(assets):
            if not a.spot > 0:
                raise ConfigError(f"spot must be > 0, got {a.spot}", f"market.assets[{i}].spot")
            if not a.vol > 0:
                raise ConfigError(f"vol must be > 0, got {a.vol}", f"market.assets[{i}].vol")
        if corr.shape != (d, d):
            raise ConfigError(f"expected a {d}x{d} matrix, got shape {corr.shape}", "market.correlation")
        if not np.allclose(corr, corr.T, atol=1e-14, rtol=0):
            raise ConfigError("matrix is not symmetric", "market.correlation")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-14, rtol=0):
            raise ConfigError("diagonal entries must be 1", "market.correlation")
        off = corr[~np.eye(d, dtype=bool)]
        if np.any(np.abs(off) >= 1.0):
            raise ConfigError("off-diagonal entries must satisfy |rho| < 1", "market.correlation")
        # raises NotPositiveDefinite
        cholesky_factor(corr)

    @property
    def dims(self):
        return len(self.assets)

    @property
    def spots(self):
        return np.array([a.spot for a in self.assets])

    @property
    def dividends(self):
        return np.array([a.dividend for a in self.assets])

    @property
    def vols(self):
        return np.array([a.vol for a in self.assets])

    def subset(self, indices):
        """Market restricted to the given asset positions (0-based)."""
        idx = list(indices)
        return MarketConfig(
            self.rate,
            tuple(self.assets[i] for i in idx),
            self.correlation[np.ix_(idx, idx)],
        )


def uniform_correlation(d, rho):
    corr = np.full((d, d), float(rho))
    np.fill_diagonal(corr, 1.0)
    return corr


TABLE1_ASSETS = tuple(
    Asset(s, q, v)
    for s, q, v in [
        (100, 0.03, 0.20),
        (150, 0.02, 0.30),
        (200, 0.05, 0.25),
        (175, 0.00, 0.24),
        (125, 0.04, 0.15),
    ]
    * 2
)
TABLE1_RATE = 0.01
TABLE1_RHO = 0.3


def table1_market(dims=1):
    """First ``dims`` stocks of the reference data set.

    Stocks 11 and beyond repeat stocks 1-10 cyclically (the 20- and 50-stock
    baskets are built that way).
    """
    assets = tuple(TABLE1_ASSETS[i % 10] for i in range(dims))
    return MarketConfig(TABLE1_RATE, assets, uniform_correlation(dims, TABLE1_RHO))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i * maturity / steps``."""

    maturity: float
    steps: int
    event_indices: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.maturity > 0:
            raise ConfigError(f"maturity must be > 0, got {self.maturity}", "grid.maturity")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"steps must be a positive integer, got {self.steps}", "grid.steps")
        object.__setattr__(self, "steps", int(self.steps))
        ev = tuple(int(i) for i in self.event_indices)
        if list(ev) != sorted(set(ev)):
            raise ConfigError("event indices must be strictly increasing", "grid.event_indices")
        if ev and (ev[0] <= 0 or ev[-1] > self.steps):
            raise ConfigError(f"event indices must lie in (0, {self.steps}]", "grid.event_indices")
        object.__setattr__(self, "event_indices", ev)

    @property
    def h(self):
        return self.maturity / self.steps

    @property
    def times(self):
        return np.arange(self.steps + 1) * self.h

    def index_of(self, t):
        """Grid index of time ``t``; ``t`` must fall on a grid node."""
        k = round(t / self.h)
        if abs(k * self.h - t) > 1e-9 * max(1.0, self.maturity):
            raise ConfigError(f"time {t} is not on the grid (h={self.h})", "grid")
        return int(k)


def cholesky_factor(correlation):
    """Lower-triangular ``L`` with ``L @ L.T == correlation``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive.
    """
    a = np.asarray(correlation, dtype=float)
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0:
            raise NotPositiveDefinite(
                f"pivot {j} is {pivot:.3g}; matrix is not positive definite",
                "market.correlation",
            )
        L[j, j] = np.sqrt(pivot)
        L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


class Scheme(enum.Enum):
    EULER = "euler"
    LOG_EULER = "log_euler"


@dataclass(frozen=True)
class PathBatch:
    """Simulated paths; ``states`` is (M, N+1, d), ``increments`` (M, N, d)."""

    states: np.ndarray
    increments: np.ndarray
    seed: int
    substream: int = 0
    first_path: int = 0
    negative_states: int = 0

    @property
    def num_paths(self):
        return self.states.shape[0]


def _correlated_increments(market, grid, seed, substream, paths):
    d, n = market.dims, grid.steps
    z = standard_normals(seed, substream, paths, n * d).reshape(len(paths), n, d)
    L = cholesky_factor(market.correlation)
    if d > 1:
        z = z @ L.T
    z *= np.sqrt(grid.h)
    return z


def _step(x, dw, drift_h, vol, h, scheme):
    if scheme is Scheme.EULER:
        return x + x * drift_h + vol * x * dw
    return x * np.exp(drift_h - 0.5 * vol * vol * h + vol * dw)


def simulate_paths(market, grid, num_paths, seed, substream=0, first_path=0, scheme=Scheme.EULER):
    """Euler paths ``X_{i+1} = X_i + (r - q) X_i h + sigma X_i dW_i``.

    Path ``j`` is a pure function of ``(seed, substream, first_path + j)``.
    """
    scheme = Scheme(scheme)
    paths = np.arange(first_path, first_path + num_paths, dtype=np.uint64)
    dw = _correlated_increments(market, grid, seed, substream, paths)
    x = np.empty((num_paths, grid.steps + 1, market.dims))
    x[:, 0, :] = market.spots
    drift_h = (market.rate - market.dividends) * grid.h
    vols = market.vols
    for i in range(grid.steps):
        x[:, i + 1, :] = _step(x[:, i, :], dw[:, i, :], drift_h, vols, grid.h, scheme)
    x.setflags(write=False)
    dw.setflags(write=False)
    return PathBatch(x, dw, seed, substream, first_path, int(np.count_nonzero(x < 0)))


def simulate_states_at(market, grid, num_paths, seed, indices, substream=0,
                       chunk_size=20_000, scheme=Scheme.EULER):
    """States at the requested grid indices only, shape (M, len(indices), d).

    Paths are simulated in chunks, so memory stays bounded for large ``M``;
    results are identical to slicing :func:`simulate_paths`.
    """
    indices = [int(i) for i in indices]
    out = np.empty((num_paths, len(indices), market.dims))
    negatives = 0
    for start in range(0, num_paths, chunk_size):
        m = min(chunk_size, num_paths - start)
        batch = simulate_paths(market, grid, m, seed, substream, start, scheme)
        out[start : start + m] = batch.states[:, indices, :]
        negatives += batch.negative_states
    return out, negatives
