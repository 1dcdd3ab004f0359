"""Exception hierarchy shared by all ergolab modules."""


class ErgolabError(Exception):
    """Base class for every error raised by ergolab."""


class InvalidParameter(ErgolabError, ValueError):
    pass


class Unsupported(ErgolabError, TypeError):
    """Operation not defined for this system family or object kind."""


class ZeroMassWindow(ErgolabError, ZeroDivisionError):
    pass


class WeightSumViolation(ErgolabError, ValueError):
    pass


class CriticalPoint(ErgolabError, ArithmeticError):
    """The derivative (or its determinant) vanishes at the requested point."""


class NumericFailure(ErgolabError, ArithmeticError):
    """Base for failures of a numeric procedure on valid input."""


class PrecisionBudgetExceeded(NumericFailure):
    pass


class BranchExplosion(NumericFailure):
    pass


class NonConvergence(NumericFailure):
    pass


class DegenerateTangent(NumericFailure):
    pass


class BilliardError(ErgolabError):
    pass


class OpenBoundary(BilliardError, ValueError):
    pass


class DegenerateComponent(BilliardError, ValueError):
    pass


class Singularity(BilliardError, NumericFailure):
    """A billiard trajectory met a point where the map is not smooth."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TangentialHit(Singularity):
    pass


class CornerHit(Singularity):
    pass


class NoIntersection(Singularity):
    pass
