"""Exception types raised by the simulator."""


class TruncationError(ValueError):
    """The requested photon-number cutoff leaves too much probability in the tail."""


class ImpossibleConditionError(ValueError):
    """The heralding outcome we condition on has zero probability."""


class DegenerateEstimateError(ValueError):
    """A ratio estimator has an empty or non-positive denominator."""


class ConfigError(ValueError):
    """A configuration document failed validation."""
