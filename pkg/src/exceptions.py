"""Custom exception classes for domain errors."""
from typing import Sequence, Tuple


class DomainException(Exception):
    """Base exception for all domain errors."""
    pass


class FieldDomainError(DomainException):
    """Raised on invalid field elements, shapes, indices or code parameters."""
    pass


class SingularMatrixError(FieldDomainError):
    """Raised when Gaussian elimination finds no pivot in a column."""

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"matrix is singular (no pivot in column {column})")


class DecoderIntegrityError(DomainException):
    """Raised when a packet contradicts what the decoder already holds."""
    pass


class DecoderStateError(DomainException):
    """Raised when decoded blocks are requested before completion."""
    pass


class ProtocolStateError(DomainException):
    """Raised when the master is asked for a packet after stopping."""
    pass


class ProtocolError(DomainException):
    """Raised on unknown results, malformed frames or out-of-order messages."""
    pass


class AuditFailure(DomainException):
    """Raised when a privacy audit finds a violating subset."""

    def __init__(self, message: str, subsets: Sequence[Tuple[int, ...]] = ()):
        self.subsets = list(subsets)
        super().__init__(message)


class VerificationFailure(DomainException):
    """Raised when a networked result differs from the local product."""
    pass


class NetTimeoutError(DomainException):
    """Raised when the master does not finish before its deadline."""
    pass


class ConfigurationError(DomainException):
    """Raised when simulation or runtime parameters are inconsistent."""
    pass
