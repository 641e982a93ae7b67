"""Error hierarchy shared by the engine and the management commands."""


class VerificationError(Exception):
    """Base class for every error raised by the verification engine."""


class ConfigError(VerificationError):
    """Run-config failed validation or references a missing file."""


class ModelError(VerificationError):
    """System model, disturbance or abstraction is numerically inconsistent."""


class PartitionError(VerificationError):
    """Rectangles or labeled regions do not form a valid partition."""


class HoaError(VerificationError):
    """Automaton input could not be parsed."""


class UnsupportedAcceptanceError(HoaError):
    """Acceptance condition is not a disjunction of Rabin pairs over states."""


class NondeterminismError(HoaError):
    """Two guards of one state hold for the same valuation."""


class IncompletenessError(HoaError):
    """No guard of a state holds for some valuation."""


class APMismatchError(HoaError):
    """A proposition is not declared by the automaton."""


class ConvergenceError(VerificationError):
    """Value iteration hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class OracleError(VerificationError):
    """A ground-truth computation refused its input or failed numerically."""
