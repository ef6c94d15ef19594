"""Exception hierarchy shared by every module."""


class DistortionLabError(Exception):
    """Base class for all library errors."""


# ifs_core
class ValidationError(DistortionLabError):
    """An IFS pair violates one of its class invariants."""


class ClassParameterViolation(ValidationError):
    pass


class FixedPointViolation(ValidationError):
    pass


class ImageRangeViolation(ValidationError):
    pass


class DerivativeRangeViolation(ValidationError):
    pass


class ModulusBoundViolation(ValidationError):
    pass


class ImageOverlap(ValidationError):
    pass


class DomainError(DistortionLabError, ValueError):
    pass


class DepthError(DistortionLabError, ValueError):
    pass


class BudgetError(DistortionLabError):
    """A requested construction would exceed a configured size cap."""


# metrics
class EmptyCloud(DistortionLabError, ValueError):
    pass


class HoleViolation(DistortionLabError, ValueError):
    pass


class DimensionError(DistortionLabError, ValueError):
    pass


class SupportTooLarge(DistortionLabError):
    pass


# separation
class DuplicateNodes(DistortionLabError, ValueError):
    pass


class GrowthOverflow(DistortionLabError, OverflowError):
    def __init__(self, log2_value):
        super().__init__(f"bound exceeds double range (log2 = {log2_value:.6g})")
        self.log2_value = log2_value


class HypothesisViolation(DistortionLabError):
    pass


class ExponentGapTooSmall(DistortionLabError):
    pass


class ClassEscape(DistortionLabError):
    pass


class GammaTooSmall(DistortionLabError, ValueError):
    pass


class DriftViolation(DistortionLabError):
    pass


# complexity
class CertificationFailure(DistortionLabError):
    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class InsufficientRows(DistortionLabError, ValueError):
    pass


class DecodeError(DistortionLabError, ValueError):
    pass


# hyperbolic
class RateSignError(DistortionLabError, ValueError):
    pass


class NoAdmissibleM(DistortionLabError):
    def __init__(self, lower, upper):
        super().__init__(
            f"no integer m in the open interval ({lower:.6g}, {upper:.6g}); "
            "increase the margin above the minimal exponent"
        )
        self.lower = lower
        self.upper = upper


class LatticeBudget(BudgetError):
    pass


class EscapeDetected(DistortionLabError):
    pass
