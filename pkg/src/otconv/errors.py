"""Exception hierarchy shared by all otconv modules."""


class OTConvError(Exception):
    """Base class for every error raised by otconv."""


class DimensionMismatch(OTConvError):
    pass


class NonpositiveTotalMass(OTConvError):
    pass


class NegativeWeight(OTConvError):
    pass


class InvalidTotalMass(OTConvError):
    """Weights are valid individually but do not sum to 1 within tolerance."""


class InvalidPlan(OTConvError):
    pass


class SourceMismatch(OTConvError):
    pass


class OutOfRange(OTConvError):
    pass


class NoRadius(OTConvError):
    """No geodesic radius could be certified down to the smallest dyadic step."""


class NonpositiveEpsilon(OTConvError):
    pass


class GradientUnavailable(OTConvError):
    pass


class SolverError(OTConvError):
    pass


class ParseError(OTConvError):
    """Malformed JSON input (missing fields, wrong types)."""
