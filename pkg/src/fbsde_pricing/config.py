"""Experiment configuration: JSON-compatible sections parsed into typed objects."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .benchmarks import PdeGrid1D
from .contracts import BermudanBasketCall, CallableYieldNote, EuropeanBasketCall, Optionality
from .errors import ConfigError, ContractNotSupported
from .market import Asset, MarketConfig, TimeGrid, uniform_correlation
from .solvers import PRESETS, TrainingProtocol

METHODS = ("forward_dnn", "lsq_backward_dnn", "lsq_mc", "pde_1d", "black_scholes")
CONTRACT_TYPES = ("european_call", "bermudan_call", "cyn")


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketConfig
    grid: TimeGrid
    contract: object
    method: str
    protocol: TrainingProtocol = TrainingProtocol()
    mc_paths: int = 1_000_000
    basis_order: int = 2
    pde: PdeGrid1D = PdeGrid1D()
    seed: int = 0
    output_dir: str | None = None
    output_format: str = "csv"
    label: str | None = None
    reference: float | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        validate_compatibility(self.method, self.contract, self.market)
        if self.output_format not in ("csv", "jsonl"):
            raise ConfigError("format must be csv or jsonl", "output.format")

    @property
    def contract_label(self):
        return self.label or self.contract.label

    def with_overrides(self, method=None, seed=None):
        raw = json.loads(json.dumps(self.raw))
        if method is not None:
            raw["method"] = method
        if seed is not None:
            raw["seed"] = seed
        return parse_config(raw)

    def canonical(self):
        """Resolved, order-independent description used for hashing."""
        return {
            "market": {
                "rate": self.market.rate,
                "assets": [[a.spot, a.dividend, a.vol] for a in self.market.assets],
                "correlation": self.market.correlation.tolist(),
            },
            "grid": [self.grid.maturity, self.grid.steps],
            "contract": _contract_dict(self.contract),
            "method": self.method,
            "protocol": _protocol_dict(self.protocol) if self.method.endswith("dnn") else None,
            "mc": [self.mc_paths, self.basis_order] if self.method == "lsq_mc" else None,
            "pde": vars(self.pde) if self.method == "pde_1d" else None,
            "seed": self.seed,
        }

    @property
    def config_hash(self):
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _contract_dict(c):
    out = {"type": type(c).__name__}
    out.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(c).items()})
    return out


def _protocol_dict(p):
    return dict(vars(p))


def validate_compatibility(method, contract, market):
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}", "method")
    if method == "forward_dnn" and contract.optionality is not Optionality.NONE:
        raise ContractNotSupported(f"forward_dnn cannot price early-exercise contracts ({contract.label})",
                                   "method")
    if method == "pde_1d" and market.dims != 1:
        raise ConfigError(f"pde_1d needs a single underlier, got {market.dims}", "method")
    if method == "black_scholes":
        if market.dims != 1 or contract.optionality is not Optionality.NONE:
            raise ContractNotSupported("black_scholes prices single-asset European calls only", "method")
    if contract.dims != market.dims:
        raise ConfigError(f"contract covers {contract.dims} assets, market has {market.dims}", "contract")


def _get(section, key, path, default=None, required=False):
    if key in section:
        return section[key]
    if required:
        raise ConfigError("missing required field", f"{path}.{key}")
    return default


def _number(value, path, kind=float):
    try:
        if isinstance(value, bool):
            raise TypeError
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", path) from None
    if kind is int and out != value:
        raise ConfigError(f"expected an integer, got {value!r}", path)
    return out


def parse_market(section):
    if not isinstance(section, dict):
        raise ConfigError("must be an object", "market")
    rate = _number(_get(section, "rate", "market", required=True), "market.rate")
    raw_assets = _get(section, "assets", "market", required=True)
    if not isinstance(raw_assets, list) or not raw_assets:
        raise ConfigError("must be a non-empty list", "market.assets")
    assets = []
    for i, a in enumerate(raw_assets):
        p = f"market.assets[{i}]"
        if not isinstance(a, dict):
            raise ConfigError("must be an object", p)
        assets.append(Asset(*(_number(_get(a, k, p, required=True), f"{p}.{k}")
                              for k in ("spot", "dividend", "vol"))))
    underliers = _get(section, "underliers", "market")
    if underliers is not None:
        if isinstance(underliers, int) and not isinstance(underliers, bool):
            underliers = list(range(1, underliers + 1))
        # 1-based stock numbers; numbers beyond the list wrap around
        try:
            assets_sel = [assets[(int(k) - 1) % len(assets)] for k in underliers]
        except (TypeError, ValueError):
            raise ConfigError("must be a count or a list of 1-based stock numbers", "market.underliers") from None
        if not underliers or any(int(k) < 1 for k in underliers):
            raise ConfigError("stock numbers start at 1", "market.underliers")
    else:
        underliers = list(range(1, len(assets) + 1))
        assets_sel = assets
    d = len(assets_sel)
    corr = _get(section, "correlation", "market", default=0.0)
    if isinstance(corr, (int, float)) and not isinstance(corr, bool):
        corr = uniform_correlation(d, corr)
    else:
        corr = np.asarray(corr, dtype=float)
        if corr.shape == (len(assets), len(assets)) and d != len(assets):
            idx = [(int(k) - 1) % len(assets) for k in underliers]
            corr = corr[np.ix_(idx, idx)]
    return MarketConfig(rate, tuple(assets_sel), corr)


def parse_grid(section):
    section = section or {}
    return TimeGrid(_number(_get(section, "maturity", "grid", 1.0), "grid.maturity"),
                    _number(_get(section, "steps", "grid", 100), "grid.steps", int))


def _indices(times, grid, path):
    if not isinstance(times, list):
        raise ConfigError("must be a list of times in years", path)
    try:
        return tuple(grid.index_of(_number(t, path)) for t in times)
    except ConfigError as exc:
        raise ConfigError(str(exc), path) from None


def parse_contract(section, market, grid):
    if not isinstance(section, dict):
        raise ConfigError("must be an object", "contract")
    kind = _get(section, "type", "contract", required=True)
    if kind not in CONTRACT_TYPES:
        raise ConfigError(f"unknown type {kind!r}; choose from {', '.join(CONTRACT_TYPES)}", "contract.type")
    spots = market.spots
    if kind in ("european_call", "bermudan_call"):
        w = _get(section, "weights", "contract", "equal")
        weights = np.full(market.dims, 1.0 / market.dims) if w == "equal" else np.asarray(w, dtype=float)
        if weights.shape != (market.dims,):
            raise ConfigError(f"need {market.dims} weights", "contract.weights")
        k = _get(section, "strike", "contract", "atm")
        strike = float(spots @ weights) if k == "atm" else _number(k, "contract.strike")
        if kind == "european_call":
            return EuropeanBasketCall(weights, strike)
        times = _get(section, "exercise_times", "contract", required=True)
        return BermudanBasketCall(weights, strike, _indices(times, grid, "contract.exercise_times"))
    schedule = _indices(_get(section, "schedule_times", "contract", required=True), grid,
                        "contract.schedule_times")
    return CallableYieldNote(
        notional=_number(_get(section, "notional", "contract", 1.0), "contract.notional"),
        coupon_rates=_get(section, "coupon_rate", "contract", required=True),
        coupon_barriers=_get(section, "coupon_barrier", "contract", required=True),
        knockin_barrier=_number(_get(section, "knockin_barrier", "contract", required=True),
                                "contract.knockin_barrier"),
        put_strike=_number(_get(section, "put_strike", "contract", 1.0), "contract.put_strike"),
        schedule=schedule,
        initial_spots=tuple(spots),
    )


def parse_protocol(section, seed):
    section = dict(section or {})
    name = section.pop("preset", "full")
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", "protocol.preset")
    allowed = set(TrainingProtocol.__dataclass_fields__) - {"seed"}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown fields {sorted(unknown)}", "protocol")
    return TrainingProtocol(**{**PRESETS[name], **section, "seed": seed})


def parse_config(raw, base_dir=None):
    """Build an :class:`ExperimentConfig` from a JSON-compatible dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    seed = _number(raw.get("seed", 0), "seed", int)
    if not 0 <= seed < 2**63:
        raise ConfigError("seed must be a non-negative 63-bit integer", "seed")
    market = parse_market(_get(raw, "market", "config", required=True))
    grid = parse_grid(raw.get("grid"))
    contract = parse_contract(_get(raw, "contract", "config", required=True), market, grid)
    contract.early_events(grid.steps)  # validates the schedule against the grid
    method = _get(raw, "method", "config", required=True)
    protocol = parse_protocol(raw.get("protocol"), seed)
    mc = raw.get("mc") or {}
    pde = raw.get("pde") or {}
    try:
        pde_grid = PdeGrid1D(**pde)
    except TypeError as exc:
        raise ConfigError(str(exc), "pde") from None
    out = raw.get("output") or {}
    out_dir = out.get("dir")
    if out_dir is not None and base_dir is not None and not Path(out_dir).is_absolute():
        out_dir = str(Path(base_dir) / out_dir)
    return ExperimentConfig(
        market=market,
        grid=grid,
        contract=contract,
        method=method,
        protocol=protocol,
        mc_paths=_number(mc.get("num_paths", 1_000_000), "mc.num_paths", int),
        basis_order=_number(mc.get("basis_order", protocol.basis_order), "mc.basis_order", int),
        pde=pde_grid,
        seed=seed,
        output_dir=out_dir,
        output_format=out.get("format", "csv"),
        label=raw.get("label"),
        reference=raw.get("reference"),
        raw=raw,
    )


def load_config(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
    return parse_config(raw)


TABLE1_JSON = {
    "market": {
        "rate": 0.01,
        "assets": [
            {"spot": s, "dividend": q, "vol": v}
            for s, q, v in [(100, 0.03, 0.2), (150, 0.02, 0.3), (200, 0.05, 0.25), (175, 0.0, 0.24),
                            (125, 0.04, 0.15)] * 2
        ],
        "correlation": 0.3,
    },
    "grid": {"maturity": 1.0, "steps": 100},
}
