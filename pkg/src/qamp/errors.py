"""Exception hierarchy shared by all modules."""


class QampError(Exception):
    """Base class for every error raised by this package."""


class NotHermitian(QampError, ValueError):
    pass


class DimensionTooLarge(QampError, ValueError):
    pass


class DimensionMismatch(QampError, ValueError):
    pass


class NoConvergence(QampError, RuntimeError):
    pass


class EmptySubspace(QampError, ValueError):
    pass


class BadSupport(QampError, ValueError):
    pass


class ParseError(QampError, ValueError):
    """Malformed instance or graph file; ``location`` points at the offending item."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class LayerOutOfRange(QampError, IndexError):
    pass


class NoLayers(QampError, ValueError):
    pass


class BadSector(QampError, ValueError):
    pass


class InvalidRegime(QampError, ValueError):
    pass


class InexactTheta(QampError, ValueError):
    """Raised when a bound would be verified against a sampled (lower-estimate) theta."""


class AllProjectedOut(QampError, ValueError):
    pass


class NotTwoLayers(QampError, ValueError):
    pass


class Infeasible(QampError, RuntimeError):
    pass


class Disconnected(QampError, ValueError):
    pass


class EnumerationTooLarge(QampError, ValueError):
    pass


class InvalidLambda(QampError, ValueError):
    pass
