"""Exception and warning classes raised across the package."""


class NetmorError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(NetmorError, ValueError):
    pass


class IndexOutOfRange(NetmorError, IndexError):
    pass


class EmptyNetwork(NetmorError, ValueError):
    pass


class NotStable(NetmorError):
    """A state matrix that must be Hurwitz is not."""


class SingularResolvent(NetmorError):
    pass


class IllPosed(NetmorError):
    """``I - D_K D_G`` is singular or too ill-conditioned (algebraic loop)."""


class Infeasible(NetmorError):
    """No block-diagonal LMI solution was found.

    ``certificate`` holds the final phase-I lower bound on the maximal
    eigenvalue of ``A P + P A^T`` over normalized block-diagonal ``P``; a
    positive value certifies infeasibility.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NumericalBreakdown(NetmorError):
    pass


class DegenerateGramian(NetmorError):
    pass


class SingularFastBlock(NetmorError):
    pass


class UnstableIterate(NetmorError):
    pass


class ObjectiveAtZero(NetmorError):
    """The H-infinity error is already (numerically) zero."""


class UnstableInit(NetmorError):
    def __init__(self, message, orders=None):
        super().__init__(message)
        self.orders = orders


class ParseError(NetmorError, ValueError):
    pass


class NearSingularBalance(UserWarning):
    """A retained structured Hankel singular value is tiny relative to the largest."""


class MinimalityWarning(UserWarning):
    pass
