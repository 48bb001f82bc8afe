"""Exception hierarchy shared by every thermalphi module.

None of these subclass ``ValueError``: pydantic only wraps ``ValueError`` and
``AssertionError`` raised inside validators, so domain errors pass through
model construction unchanged and callers can catch them by name.
"""


class ThermalPhiError(Exception):
    """Root of all errors raised by the package."""


# lattice
class NonPositiveParameter(ThermalPhiError):
    pass


class OddLatticeSize(ThermalPhiError):
    pass


class LatticeTooLargeForDenseOracle(ThermalPhiError):
    pass


class LatticeMismatch(ThermalPhiError):
    pass


class UnsupportedDispersion(ThermalPhiError):
    pass


# wick
class NegativeOrder(ThermalPhiError):
    pass


class NegativeCovariance(ThermalPhiError):
    pass


class DegreeTooHigh(ThermalPhiError):
    pass


class BoundedBelowViolation(ThermalPhiError):
    pass


# oracles / continuation
class ArgumentOutsidePeriod(ThermalPhiError):
    pass


class DomainError(ThermalPhiError):
    """A complex argument lies outside the region where a function is analytic."""


class PointOutsideAnalyticityDomain(DomainError):
    pass


class TubeViolation(DomainError):
    pass


class QuadratureTailTooLarge(ThermalPhiError):
    pass


class TailTooLarge(ThermalPhiError):
    pass


class LambdaMismatch(ThermalPhiError):
    pass


class InvalidRegion(ThermalPhiError):
    pass


class StencilOutsideDomain(ThermalPhiError):
    pass


# measure / estimate
class CutoffOutOfRange(ThermalPhiError):
    pass


class WickConstantMismatch(ThermalPhiError):
    pass


class DegenerateWeights(ThermalPhiError):
    pass


class AcceptanceOutOfRange(ThermalPhiError):
    pass


class SupportViolation(ThermalPhiError):
    pass


class AsymmetricLatticeForExactVariant(ThermalPhiError):
    pass


class GapTooSmall(ThermalPhiError):
    pass


class OffLatticeTime(ThermalPhiError):
    pass


# fock
class DimensionTooLarge(ThermalPhiError):
    pass


class NoConstantsFound(ThermalPhiError):
    pass


class DegenerateGround(ThermalPhiError):
    pass


class ExponentInfeasible(ThermalPhiError):
    pass


class TruncationTooSevere(ThermalPhiError):
    pass


# cli
class ParseError(ThermalPhiError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ConfigValidationError(ThermalPhiError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ExperimentError(ThermalPhiError):
    """An experiment raised; carries the experiment name for the exit message."""

    def __init__(self, experiment: str, cause: BaseException):
        self.experiment = experiment
        self.cause = cause
        super().__init__(f"{experiment}: {type(cause).__name__}: {cause}")
