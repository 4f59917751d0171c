"""Exception hierarchy shared by every module of the package."""


class CubicNEFError(Exception):
    """Base class for all errors raised by :mod:`cubic_nef`."""


class NonConvergence(CubicNEFError):
    """An iterative numerical routine exhausted its budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NonFinite(CubicNEFError, ArithmeticError):
    """A function returned NaN or an infinity where a finite value is required."""


class InvalidBracket(CubicNEFError, ValueError):
    pass


class InvalidParameter(CubicNEFError, ValueError):
    pass


class OutOfDomain(CubicNEFError, ValueError):
    pass


class UnknownBaseDensity(CubicNEFError):
    """The generating measure of the model has no closed-form density."""


class NotInJorgensenSet(CubicNEFError, ValueError):
    pass


class OutsideJorgensen(CubicNEFError, ValueError):
    pass


class TransportUndefined(CubicNEFError, ValueError):
    pass


class NonIntegrable(CubicNEFError):
    pass


class InvalidData(CubicNEFError, ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SingularFit(CubicNEFError):
    pass
