"""Exception hierarchy shared by every module of the package."""


class TeloinvError(Exception):
    """Base class for all package errors."""


class NonNormalizedDensity(TeloinvError):
    pass


class DegenerateLambda(TeloinvError):
    pass


class AbscissaViolation(TeloinvError):
    pass


class UnboundedEnvelope(TeloinvError):
    pass


class StabilityViolation(TeloinvError):
    pass


class MassDrift(TeloinvError):
    pass


class NonTermination(TeloinvError):
    pass


class NonIntegerShape(TeloinvError):
    pass


class OutsidePN(TeloinvError):
    """Laplace variable outside the admissible set of the link map."""


class InsufficientHorizon(TeloinvError):
    pass


class PrecisionExhausted(TeloinvError):
    """Cancellation in a Gaver-Stehfest sum consumed the working precision."""


class BandwidthOutOfRange(TeloinvError):
    pass


class ZeroSpread(TeloinvError):
    pass


class InsufficientPoints(TeloinvError):
    pass
