"""Exception hierarchy shared by every module.

Each numerical failure mode gets its own class so callers (and the CLI) can
report the precise cause. All of them derive from :class:`SmallBallError`.
"""


class SmallBallError(Exception):
    """Base class for all library errors."""


class BadParameter(SmallBallError, ValueError):
    pass


class NonSummable(SmallBallError, ValueError):
    pass


class NotMonotone(SmallBallError, ValueError):
    pass


class NoTailModel(SmallBallError, ValueError):
    pass


class DomainError(SmallBallError, ValueError):
    pass


class OutOfRange(DomainError):
    pass


class ToleranceUnreachable(SmallBallError, ArithmeticError):
    pass


class NoConvergence(SmallBallError, ArithmeticError):
    pass


class QuadratureFailure(SmallBallError, ArithmeticError):
    pass


class PoorFit(SmallBallError, ArithmeticError):
    pass


class DegenerateTilt(SmallBallError, ArithmeticError):
    pass


class UnderflowRegime(SmallBallError, ArithmeticError):
    """The requested probability is too deep in the tail for CF inversion."""


class VacuousBracket(SmallBallError, ArithmeticError):
    pass


class NotRegularlyVarying(SmallBallError, ValueError):
    pass


class LeavesDomain(SmallBallError, ValueError):
    pass


class NonPositivePhi(SmallBallError, ValueError):
    pass


class ConfigError(SmallBallError, ValueError):
    pass
