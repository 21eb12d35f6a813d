"""Exception hierarchy shared by every module."""


class CurvmixError(Exception):
    """Base class for all errors raised by curvmix."""


class ChainValidationError(CurvmixError, ValueError):
    pass


class RowSumError(ChainValidationError):
    pass


class NegativeEntryError(ChainValidationError):
    pass


class ReducibleError(ChainValidationError):
    pass


class ParseError(CurvmixError, ValueError):
    pass


class NumericalFailure(CurvmixError, ArithmeticError):
    pass


class BitBudgetExceeded(CurvmixError, OverflowError):
    """Exact denominators grew past the configured bit budget."""


class SolverStall(CurvmixError, RuntimeError):
    pass


class HypothesisError(CurvmixError):
    """A theorem hypothesis (laziness, curvature, ...) does not hold."""


class TooLargeError(CurvmixError, ValueError):
    pass


class NotReversibleError(CurvmixError, ValueError):
    pass


class NotCenteredError(CurvmixError, ValueError):
    pass


class NotGeneratingError(CurvmixError, ValueError):
    pass


class SizeError(CurvmixError, ValueError):
    pass


class TruncationError(CurvmixError):
    """A step horizon was hit before the quantity of interest was reached."""
