"""
Exception hierarchy shared by every hoprewire module.

Library code raises these; only the command-line layer turns them into exit codes.
"""

from typing import Any


class HopRewireError(Exception):
    """Root of all toolkit errors."""


class GraphValidationError(HopRewireError, ValueError):
    """An AttributedGraph invariant or a dataset record is violated."""


class NotRecoverableError(HopRewireError):
    """The original graph cannot be rebuilt from a rewired graph."""


class RewireError(HopRewireError):
    """Invalid rewiring request (double CLS insertion, bad constant features)."""


class PositionalEncodingError(HopRewireError):
    """A positional encoding is missing, of the wrong kind or malformed."""


class GenerationError(HopRewireError):
    """A synthetic dataset could not be generated with the given parameters."""


class ConfigError(HopRewireError):
    """Inconsistent pipeline configuration."""


class NumericalError(HopRewireError):
    """Base class for numerical failures (exit code 70 at the CLI)."""


class WalkCountOverflowError(NumericalError):
    """A walk count does not fit into a 64-bit integer."""

    def __init__(self, power: int, bound: float):
        self.power = power
        self.bound = bound
        super().__init__(
            f"walk counts overflow int64 at power {power} (row-sum bound {bound:.3e})"
        )


class ConvergenceError(NumericalError):
    """The Jacobi eigensolver did not converge within the sweep cap."""

    def __init__(self, sweeps: int, residual: float):
        self.sweeps = sweeps
        self.residual = residual
        super().__init__(
            f"Jacobi eigensolver did not converge after {sweeps} sweeps "
            f"(off-diagonal residual {residual:.3e})"
        )


class NonFiniteError(NumericalError):
    """NaN or infinity in activations or gradients."""


class TrainingDivergedError(NumericalError):
    """Training loss became non-finite; the partial history is attached."""

    def __init__(self, message: str, history: list[Any]):
        self.history = history
        super().__init__(message)
