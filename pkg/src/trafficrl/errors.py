"""Exception types shared across the package."""


class TrafficRLError(Exception):
    pass


class ConfigError(TrafficRLError, ValueError):
    """Malformed scenario, training or experiment configuration."""


class ParameterError(TrafficRLError, ValueError):
    """A numeric parameter is outside its allowed range."""


class ArgumentError(TrafficRLError, ValueError):
    """An operation received an out-of-contract argument."""


class ShapeError(TrafficRLError, ValueError):
    """Tensor shape does not match what a layer expects."""


class UsageError(TrafficRLError, RuntimeError):
    """API called out of order (e.g. backward before forward)."""


class FormatError(TrafficRLError, ValueError):
    """Unreadable or inconsistent file contents."""


class SimulationError(TrafficRLError, RuntimeError):
    """Internal simulator invariant breach."""
