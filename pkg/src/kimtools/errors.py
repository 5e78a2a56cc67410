"""Domain errors raised across the toolkit.

Every error carries a stable ``name`` so the command line can report it.
"""


class KimError(Exception):
    """Base class for all domain errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


# exact arithmetic
class OutOfSpace(KimError):
    pass


class PoleAtBase(KimError):
    pass


# Lie algebras
class UnsupportedQuotient(KimError):
    pass


class SpecMismatch(KimError):
    pass


class NotUnipotent(KimError):
    pass


class NotLieElement(KimError):
    pass


class DegenerateSpec(KimError):
    pass


# connections
class NotClosedUnderD(KimError):
    pass


class NotFlat(KimError):
    pass


class NotReducible(KimError):
    pass


class UnsupportedChart(KimError):
    pass


# transport
class NotGroupLike(KimError):
    pass


# intersections
class PoleOnV(KimError):
    pass


class NotARelation(KimError):
    pass


# cohomology dimensions
class BadTwist(KimError):
    pass


class DimensionMismatch(KimError):
    pass


# criteria
class InvalidData(KimError):
    pass


class WrongField(KimError):
    pass


class LengthMismatch(KimError):
    pass


class MissingFlag(KimError):
    pass


# formal groups
class SingularCurve(KimError):
    pass


class BadLeadingTerm(KimError):
    pass
