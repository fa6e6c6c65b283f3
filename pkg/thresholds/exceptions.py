class ThresholdsError(Exception):
    """Base class for every numerical failure raised by the thresholds app."""


class DomainError(ThresholdsError, ValueError):
    """A probability, time or horizon outside the domain of an operation."""


class ParameterError(ThresholdsError, ValueError):
    pass


class InfeasibleTargetError(ThresholdsError):
    """Q* shares cannot be bought in N opportunities."""


class EndOfHorizonError(ThresholdsError):
    """Closed form evaluated where N(1-t) leaves its domain."""


class SaturatedPolicy(ThresholdsError):
    """The lambda iteration reached |lambda| >= 1.

    `probability` is the hard value the policy takes in that regime
    (0 when lambda saturates at +1, 1 when it saturates at -1).
    """

    def __init__(self, probability, lam):
        super().__init__(f"lambda saturated at {lam:+.6f}; policy pinned to {probability}")
        self.probability = probability
        self.lam = lam


class CalibrationError(ThresholdsError):
    pass


class UndefinedRatioError(ThresholdsError):
    """perf_optimal and perf_deterministic are numerically equal."""


class FieldContractError(ThresholdsError):
    """A fill-rate field returned values outside [0, 1]."""


class SaturationError(ThresholdsError):
    """Trading speed cannot be realized with u observations per unit time."""

    def __init__(self, message, minimal_u):
        super().__init__(message)
        self.minimal_u = minimal_u


class TrajectoryNotStoredError(ThresholdsError):
    pass


class EmpiricalDataError(ThresholdsError):
    pass
