"""Exception hierarchy shared by all modules."""


class FrobsiaError(Exception):
    """Base class for all package errors."""


class ExprSyntaxError(FrobsiaError, ValueError):
    """Raised by the expression parser; carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class PoleError(FrobsiaError, ArithmeticError):
    """Evaluation hit a pole: division by zero, log/sqrt of a non-positive argument."""


class DomainError(FrobsiaError, ValueError):
    """A point or path leaves the declared domain box."""


class IntegrabilityError(FrobsiaError):
    """Path integration produced path-dependent results above tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PreconditionError(FrobsiaError):
    """An operation's axiom precondition failed."""

    def __init__(self, message, reports=None):
        super().__init__(message)
        self.reports = reports or []


class SchemaError(FrobsiaError, ValueError):
    """A structure file does not conform to the JSON schema."""


class RankDeficiencyError(FrobsiaError):
    """Could not reach the required number of functionally independent integrals."""

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank
