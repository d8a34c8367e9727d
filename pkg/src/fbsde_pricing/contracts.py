"""Payoffs and event cashflows for basket calls and callable yield notes.

All payoff functions are vectorized: ``levels`` has trailing axis ``d`` and
any number of leading (path) axes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EventNotInSchedule


class Optionality(enum.Enum):
    HOLDER = "holder"
    ISSUER = "issuer"
    NONE = "none"


def heaviside(x):
    """1 where ``x >= 0`` else 0 (barrier inclusive)."""
    return np.where(np.asarray(x) >= 0, 1.0, 0.0)


def performance(initial_spots, levels):
    """Worst-of performance ``min_j levels[j] / initial_spots[j]``."""
    return np.min(np.asarray(levels) / np.asarray(initial_spots), axis=-1)


@dataclass(frozen=True)
class EventCashflow:
    coupon: np.ndarray
    call_value: np.ndarray
    holder_optionality: Optionality


def _check_weights(weights, label):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ConfigError("weights must be a non-empty vector", f"contract.{label}")
    return tuple(float(v) for v in w)


@dataclass(frozen=True)
class EuropeanBasketCall:
    weights: tuple[float, ...]
    strike: float

    optionality = Optionality.NONE
    label = "european"

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights, "weights"))

    @property
    def dims(self):
        return len(self.weights)

    def basket(self, levels):
        return np.asarray(levels) @ np.asarray(self.weights)

    def intrinsic(self, levels):
        return np.maximum(self.basket(levels) - self.strike, 0.0)

    def terminal_payoff(self, levels):
        return self.intrinsic(levels)

    def early_events(self, steps):
        return ()

    def event_cashflow(self, event_index, levels):
        raise EventNotInSchedule(f"{self.label} contract has no event at index {event_index}")

    # scale of Z per asset is vol * value_scale; see solvers
    def value_scale(self, spots):
        return float(self.basket(spots))

    def regressor(self, levels, spots):
        return self.basket(levels) / self.basket(spots)

    def decision_mask(self, levels):
        return self.intrinsic(levels) > 0


@dataclass(frozen=True)
class BermudanBasketCall(EuropeanBasketCall):
    """Basket call exercisable at ``exercise_dates`` (grid indices)."""

    exercise_dates: tuple[int, ...] = ()

    optionality = Optionality.HOLDER
    label = "bermudan"

    def __post_init__(self):
        super().__post_init__()
        dates = tuple(int(i) for i in self.exercise_dates)
        if list(dates) != sorted(set(dates)) or (dates and dates[0] <= 0):
            raise ConfigError("exercise dates must be strictly increasing positive grid indices",
                              "contract.exercise_dates")
        object.__setattr__(self, "exercise_dates", dates)

    def early_events(self, steps):
        if self.exercise_dates and self.exercise_dates[-1] > steps:
            raise ConfigError(f"exercise date beyond maturity index {steps}", "contract.exercise_dates")
        return tuple(i for i in self.exercise_dates if i < steps)

    def event_cashflow(self, event_index, levels):
        if event_index not in self.exercise_dates:
            raise EventNotInSchedule(f"no exercise date at index {event_index}")
        value = self.intrinsic(levels)
        return EventCashflow(np.zeros_like(value), value, Optionality.HOLDER)


@dataclass(frozen=True)
class CallableYieldNote:
    """Worst-of issuer-callable note with contingent coupons and a knock-in put.

    ``schedule`` holds the coupon/call grid indices; its last entry is the
    maturity index. Barriers and the put strike are fractions of initial
    performance.
    """

    notional: float
    coupon_rates: tuple[float, ...]
    coupon_barriers: tuple[float, ...]
    knockin_barrier: float
    put_strike: float
    schedule: tuple[int, ...]
    initial_spots: tuple[float, ...]

    optionality = Optionality.ISSUER
    label = "cyn"

    def __post_init__(self):
        sched = tuple(int(i) for i in self.schedule)
        n = len(sched)
        rates = tuple(float(v) for v in np.broadcast_to(self.coupon_rates, (n,)))
        bars = tuple(float(v) for v in np.broadcast_to(self.coupon_barriers, (n,)))
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "coupon_rates", rates)
        object.__setattr__(self, "coupon_barriers", bars)
        object.__setattr__(self, "initial_spots", tuple(float(s) for s in self.initial_spots))
        if n == 0 or list(sched) != sorted(set(sched)) or sched[0] <= 0:
            raise ConfigError("schedule must be strictly increasing positive grid indices", "contract.schedule")
        if not all(0 < b <= 1 for b in bars):
            raise ConfigError("coupon barriers must lie in (0, 1]", "contract.coupon_barriers")
        if not 0 < self.knockin_barrier < 1:
            raise ConfigError("knock-in barrier must lie in (0, 1)", "contract.knockin_barrier")
        if not 0 < self.put_strike <= 1:
            raise ConfigError("put strike must lie in (0, 1]", "contract.put_strike")
        if not self.notional > 0:
            raise ConfigError("notional must be > 0", "contract.notional")
        if any(s <= 0 for s in self.initial_spots):
            raise ConfigError("initial spots must be > 0", "contract.initial_spots")

    @property
    def dims(self):
        return len(self.initial_spots)

    def performance(self, levels):
        return performance(self.initial_spots, levels)

    def terminal_payoff(self, levels):
        p = self.performance(levels)
        coupon = self.coupon_rates[-1] * heaviside(p - self.coupon_barriers[-1])
        put = heaviside(self.knockin_barrier - p) * np.maximum(self.put_strike - p, 0.0)
        return self.notional * (1.0 + coupon - put)

    def early_events(self, steps):
        if self.schedule[-1] != steps:
            raise ConfigError(f"last schedule index must equal maturity index {steps}", "contract.schedule")
        return self.schedule[:-1]

    def coupon(self, position, levels):
        p = self.performance(levels)
        return self.notional * self.coupon_rates[position] * heaviside(p - self.coupon_barriers[position])

    def event_cashflow(self, event_index, levels):
        if event_index not in self.schedule[:-1]:
            raise EventNotInSchedule(f"no call date at index {event_index}")
        coupon = self.coupon(self.schedule.index(event_index), levels)
        return EventCashflow(coupon, np.full_like(coupon, self.notional), Optionality.ISSUER)

    def value_scale(self, spots):
        return float(self.notional)

    def regressor(self, levels, spots):
        return self.performance(levels)

    def decision_mask(self, levels):
        return np.ones(np.shape(levels)[:-1], dtype=bool)


ContractSpec = EuropeanBasketCall | BermudanBasketCall | CallableYieldNote


def terminal_payoff(contract, levels):
    return contract.terminal_payoff(levels)


def event_cashflow(contract, event_index, levels):
    return contract.event_cashflow(event_index, levels)


def equal_weight_call(spots, exercise_dates=None):
    """ATM basket call with weights ``1/d``; Bermudan if dates are given."""
    spots = np.asarray(spots, dtype=float)
    w = np.full(spots.size, 1.0 / spots.size)
    strike = float(spots @ w)
    if exercise_dates is None:
        return EuropeanBasketCall(w, strike)
    return BermudanBasketCall(w, strike, tuple(exercise_dates))


def table4_cyn(spots, schedule, notional=1.0):
    return CallableYieldNote(
        notional=notional,
        coupon_rates=0.05,
        coupon_barriers=0.70,
        knockin_barrier=0.50,
        put_strike=1.00,
        schedule=tuple(schedule),
        initial_spots=tuple(spots),
    )
