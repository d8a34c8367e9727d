"""FBSDE pricing with neural-network hedges, plus classical benchmarks."""

from .benchmarks import black_scholes_call, crank_nicolson_1d, lsq_monte_carlo
from .config import ExperimentConfig, load_config, parse_config
from .contracts import BermudanBasketCall, CallableYieldNote, EuropeanBasketCall
from .errors import ConfigError, ContractNotSupported, NumericalFailure, PricingError
from .harness import emit_report, run_experiment, run_price
from .market import Asset, MarketConfig, TimeGrid, simulate_paths
from .solvers import TrainingProtocol, forward_dnn_solve, lsq_backward_dnn_solve, preset

__version__ = "0.1.0"
