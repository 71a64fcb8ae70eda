"""Exception and warning classes raised by graphtf."""


class GraphTFError(Exception):
    """Base class for all graphtf errors."""


class InvalidParameter(GraphTFError, ValueError):
    pass


class IndexOutOfRange(GraphTFError, IndexError):
    pass


class SelfLoop(GraphTFError, ValueError):
    pass


class DuplicateEdge(GraphTFError, ValueError):
    pass


class DimensionMismatch(GraphTFError, ValueError):
    pass


class UnsupportedOrder(GraphTFError, ValueError):
    pass


class WeightedGraph(GraphTFError, ValueError):
    """An unweighted-only formula was applied to a weighted graph."""


class NotAChain(GraphTFError, ValueError):
    pass


class TooLarge(GraphTFError, ValueError):
    """A dense computation was requested above its size threshold."""


class NotUnitNorm(GraphTFError, ValueError):
    pass


class Disconnected(GraphTFError, ValueError):
    pass


class ParseError(GraphTFError, ValueError):
    """Malformed input file. ``lineno`` is 1-based, or None."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class MaxIterationsExceeded(UserWarning):
    """Solver hit its iteration cap; the best iterate is returned flagged."""


class IllConditioned(UserWarning):
    """An inner conjugate-gradient solve stagnated."""
