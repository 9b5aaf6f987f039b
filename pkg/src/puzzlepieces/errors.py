"""Exception types shared by every module."""


class PuzzleError(Exception):
    """Base class for all library errors."""


class ParseError(PuzzleError, ValueError):
    pass


class InvalidLetter(PuzzleError, ValueError):
    pass


class NotComplete(PuzzleError):
    pass


class NotGreatlyRegular(PuzzleError):
    pass


class BudgetExceeded(PuzzleError):
    pass


class NotAdmissible(PuzzleError):
    def __init__(self, message: str, index: int = -1):
        super().__init__(message)
        self.index = index


class DegenerateParameter(PuzzleError):
    pass


class PrecisionExhausted(PuzzleError):
    pass


class OutOfRange(PuzzleError, ValueError):
    pass


class BoundaryHit(PuzzleError):
    pass


class DepthUnreachable(PuzzleError):
    pass


class DerivativeVanishes(PuzzleError):
    pass


class HypothesisViolated(PuzzleError):
    pass


class SolveFailure(PuzzleError):
    def __init__(self, message: str, nodes=None):
        super().__init__(message)
        self.nodes = list(nodes or [])


class BranchOverlap(PuzzleError):
    pass


class FlatnessViolated(PuzzleError):
    pass


class NotInDomain(PuzzleError):
    pass


class RootCountError(PuzzleError):
    pass
