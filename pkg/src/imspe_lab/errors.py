"""Exception hierarchy shared by every module."""


class ImspeLabError(Exception):
    pass


class DomainError(ImspeLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularMatrixError(ImspeLabError, ArithmeticError):
    """A pivot vanished at the current precision; ``pivot`` is its magnitude."""

    def __init__(self, pivot):
        super().__init__(f"near-zero pivot {float(pivot):.3e}")
        self.pivot = pivot


class DegenerateDesignError(ImspeLabError, ValueError):
    """Two design points coincide exactly."""


class IllConditionedError(ImspeLabError, ArithmeticError):
    """Precision escalation hit its ceiling without a trustworthy value."""

    def __init__(self, message, digits_used, escalations, min_pivot=None):
        super().__init__(message)
        self.digits_used = digits_used
        self.escalations = escalations
        self.min_pivot = min_pivot


class UnsupportedDesignError(ImspeLabError, ValueError):
    """Operation only defined for a particular design shape."""


class DesignParseError(ImspeLabError, ValueError):
    """Malformed design file; ``line`` is 1-based, or None for whole-file problems."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
