"""Exception hierarchy shared by all model modules."""


class KMSHeatError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(KMSHeatError, ValueError):
    """Malformed model data (bad edge references, unreduced words, ...)."""


# spectral core
class DivergentSeries(KMSHeatError):
    pass


class MissingGrowthBound(KMSHeatError):
    pass


class TruncationTooShort(KMSHeatError):
    """The stored spectrum is too short to reach the requested tail tolerance."""


class WindowTooNarrow(KMSHeatError):
    pass


class ZeroDenominator(KMSHeatError, ZeroDivisionError):
    pass


class NegativeWeight(KMSHeatError, ValueError):
    pass


# asymptotics
class InsufficientSamples(KMSHeatError):
    pass


class NotDivergent(KMSHeatError):
    pass


class ScheduleExceedsData(KMSHeatError):
    pass


class DivergentSum(KMSHeatError):
    pass


# graphs
class NotPrimitive(KMSHeatError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class BelowCritical(KMSHeatError):
    pass


class BelowLogE(KMSHeatError):
    pass


class IncompleteStateTable(KMSHeatError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# correspondences
class ZeroTrace(KMSHeatError):
    pass


class NotCritical(KMSHeatError):
    pass


class LNConditionViolated(KMSHeatError):
    pass


class BelowThreshold(KMSHeatError):
    pass


# free groups
class ShallowCylinder(KMSHeatError):
    pass


class DepthInsufficient(KMSHeatError):
    pass


# torus
class CutoffInsufficient(KMSHeatError):
    pass


class MatrixTooLarge(KMSHeatError):
    pass


# cli
class SchemaError(KMSHeatError):
    pass
