import numpy as np
import pytest
from hypothesis import settings

from fbsde_pricing.market import table1_market

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def stock1():
    return table1_market(1)


@pytest.fixture(scope="session")
def five_stocks():
    return table1_market(5)


def zero_vol(rate=0.01, spot=100.0, dividend=0.0):
    """A single asset with negligible volatility (vol must stay positive)."""
    from fbsde_pricing.market import Asset, MarketConfig
    return MarketConfig(rate, (Asset(spot, dividend, 1e-12),), np.eye(1))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
