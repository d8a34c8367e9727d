"""Exception types raised across the package."""


class PricingError(Exception):
    """Base class for library errors."""


class ConfigError(PricingError, ValueError):
    """Invalid user configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NotPositiveDefinite(ConfigError):
    pass


class ContractNotSupported(ConfigError):
    pass


class EventNotInSchedule(PricingError, KeyError):
    pass


class DimensionMismatch(PricingError, ValueError):
    pass


class UnsupportedPrimitive(PricingError, TypeError):
    pass


class InsufficientPoints(PricingError, ValueError):
    pass


class DegenerateDesign(PricingError, ValueError):
    pass


class SpotOutsideGrid(PricingError, ValueError):
    pass


class UnknownExperiment(ConfigError):
    pass


class NumericalFailure(PricingError, ArithmeticError):
    """A pricer produced a non-finite result."""
