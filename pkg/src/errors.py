"""
Error types for the Puiseux expansion toolkit.
Every error carries an exit code for the command-line runner and a dict form for JSON reports.
"""

from typing import Any, Dict, Optional


class PuiseuxError(Exception):
    """Base class for all library errors."""

    exit_code = 3
    kind = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        """Serialize the error for JSON output documents."""
        payload = {"success": False, "kind": self.kind, "error": self.message}
        if self.details:
            payload["details"] = {key: str(value) for key, value in sorted(self.details.items())}
        return payload


class ParseError(PuiseuxError, ValueError):
    """Malformed input document or expression."""

    exit_code = 2
    kind = "parse-error"

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = ""
        if line is not None:
            location = f" (line {line}, column {column if column is not None else 1})"
        super().__init__(f"{message}{location}", line=line, column=column)
        self.line = line
        self.column = column


class DomainError(PuiseuxError, ValueError):
    """Mathematical precondition or domain violation."""

    exit_code = 3
    kind = "domain-error"


class PrecisionError(DomainError):
    """A quantity is not determined at the available precision."""

    kind = "precision-error"


class NotSquarefreeError(DomainError):
    """A polynomial that must be squarefree has a repeated factor."""

    kind = "not-squarefree"

    def __init__(self, message: str, factor: Any = None):
        super().__init__(message, factor=factor)
        self.factor = factor


class HypothesisError(DomainError):
    """A theorem hypothesis checked at runtime does not hold."""

    kind = "hypothesis-failed"


class CertificateError(DomainError):
    """An internal consistency certificate failed."""

    kind = "certificate-failed"


class InvertibleWitness(DomainError):
    """A zero-divisor split was requested for an invertible element."""

    kind = "invertible-witness"

    def __init__(self, message: str, inverse: Any = None):
        super().__init__(message)
        self.inverse = inverse


class BudgetExhausted(PuiseuxError):
    """A bounded search ran out of budget."""

    exit_code = 4
    kind = "budget-exhausted"

    def __init__(self, message: str, best: Any = None):
        super().__init__(message, best=best)
        self.best = best


class ZeroDivisorFound(PuiseuxError):
    """
    Raised when an inversion meets a zero divisor in a tower level.
    Carries the level whose modulus has the nontrivial factor.
    """

    kind = "zero-divisor"

    def __init__(self, level: Any, factor: Any):
        super().__init__(f"zero divisor found at level {getattr(level, 'name', level)}")
        self.level = level
        self.factor = factor
