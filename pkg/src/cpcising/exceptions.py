"""Exception types raised across the package."""


class CpcError(Exception):
    """Base class for all package errors."""


class CodeValidationError(CpcError, ValueError):
    """A CPC code violates a structural invariant (shape, binary entries, diagonal)."""


class ConventionError(CpcError):
    """Propagation tables break the parity-bit-error invariant.

    Raised when the X error on some parity qubit does not map to a unit
    syndrome vector with trivial logical action, which means the gate
    convention in use cannot support implicit parity bit errors.
    """

    def __init__(self, message, parity_qubit=None):
        super().__init__(message)
        self.parity_qubit = parity_qubit


class DomainError(CpcError, ValueError):
    """A probability or temperature lies outside the supported domain."""


class CapacityError(CpcError):
    """Exhaustive computation requested beyond the configured size cap."""


class BracketError(CpcError, ValueError):
    """Threshold search interval does not bracket a sign change."""
