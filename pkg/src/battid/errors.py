"""Exception types raised across the package.

Every error derives from BattidError so callers can catch the whole family.
Grouped loosely by the stage that raises them.
"""


class BattidError(Exception):
    """Base class for all battid errors."""


# --- data ingestion / records ---

class MissingColumn(BattidError):
    pass


class NonMonotonicTime(BattidError):
    pass


class NonUniformSampling(BattidError):
    pass


class EmptyFile(BattidError):
    pass


class SocOutOfRange(BattidError):
    pass


class MissingSoc(BattidError):
    pass


# --- simulation ---

class SocRangeExceeded(BattidError):
    pass


class NonFiniteOcv(BattidError):
    pass


class DomainError(BattidError):
    pass


# --- filters ---

class PoleEvaluation(BattidError):
    pass


class DegenerateBank(BattidError):
    pass


class EmptyInput(BattidError):
    pass


# --- splines ---

class OutOfSupport(BattidError):
    pass


class BadOrder(BattidError):
    pass


class UnsortedInput(BattidError):
    pass


class TooSmall(BattidError):
    pass


# --- regression / solver ---

class DegenerateColumn(BattidError):
    pass


class NumericalFailure(BattidError):
    pass


class SvdFailure(BattidError):
    pass


class DegenerateP(BattidError):
    pass


# --- recovery ---

class SingularSystem(BattidError):
    pass


class ComplexTimeConstants(BattidError):
    pass


class NonPhysical(BattidError):
    pass


# --- evaluation ---

class LengthMismatch(BattidError):
    pass


class ZeroVariance(BattidError):
    pass


class AllSolvesFailed(BattidError):
    pass


class NegativeCoefficientWarning(UserWarning):
    """Recovered denominator coefficients imply an unstable circuit."""
