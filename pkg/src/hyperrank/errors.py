"""Exception hierarchy shared by every module.

Input problems derive from ``ValueError`` (CLI exit code 2); numerical
breakdowns derive from ``ArithmeticError`` (CLI exit code 3).
"""


class HyperrankError(Exception):
    pass


class InvalidInputError(HyperrankError, ValueError):
    pass


class ShapeError(InvalidInputError):
    pass


class IsolatedVertexError(InvalidInputError):
    def __init__(self, vertex):
        self.vertex = int(vertex)
        super().__init__(f"vertex {self.vertex} has zero degree (no positively weighted hyperedge)")


class EmptyHyperedgeError(InvalidInputError):
    def __init__(self, edge):
        self.edge = int(edge)
        super().__init__(f"hyperedge {self.edge} contains no vertex")


class NumericalFailure(HyperrankError, ArithmeticError):
    def __init__(self, message, residual=float("nan")):
        self.residual = residual
        super().__init__(message)


class SingularMatrixError(NumericalFailure):
    def __init__(self, message, index=None, path=None):
        self.index = index
        self.path = path
        super().__init__(message)


class ConvergenceError(NumericalFailure):
    """Iteration cap hit; ``f`` holds the best iterate found."""

    def __init__(self, message, f=None, residual=float("nan"), iters=0):
        self.f = f
        self.iters = iters
        super().__init__(message, residual)


class DegenerateSimplexError(NumericalFailure):
    pass


class ContractViolation(HyperrankError):
    pass
