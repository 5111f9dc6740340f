"""Exception types raised across the package."""


class ECPError(ValueError):
    """Base class for invalid input to any operation."""


class EmptyState(ECPError):
    pass


class BasisMismatch(ECPError):
    pass


class ArityMismatch(ECPError):
    pass


class NonUnitaryGate(ECPError):
    pass


class UnknownSlot(ECPError, KeyError):
    def __str__(self) -> str:
        return ValueError.__str__(self)


class IncompleteTable(ECPError):
    pass


class NonUnitPhase(ECPError):
    pass


class BadPartition(ECPError):
    pass


class LayoutMismatch(ECPError):
    pass


class InvalidParams(ECPError):
    pass


class SingularDenominator(ECPError, ZeroDivisionError):
    pass


class PurePhaseApproxViolated(ECPError):
    """|r| is too far from 1 for the reflected photon to be treated as a pure phase."""


class BadCoefficients(ECPError):
    pass


class MalformedInput(ECPError):
    pass


class InsufficientTrials(ECPError):
    pass


class ConsistencyError(AssertionError):
    """An internal cross-check between simulation and closed form failed."""
