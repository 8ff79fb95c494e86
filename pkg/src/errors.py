"""Exception hierarchy shared by every module.

Each family carries the process exit code the CLI reports for it.
"""
from __future__ import annotations

from typing import Any, Optional


class LabError(Exception):
    """Base class. `hbar` is filled in by sweeps so a failure names its run."""

    exit_code = 1

    def __init__(self, message: str = "", hbar: Optional[float] = None):
        super().__init__(message)
        self.message = message
        self.hbar = hbar

    def __str__(self) -> str:
        if self.hbar is not None:
            return f"{self.message} (hbar={self.hbar!r})"
        return self.message


class InvalidParameter(LabError, ValueError):
    """A value type was constructed in violation of its invariants."""

    exit_code = 2


class ConfigInvalid(LabError, ValueError):
    exit_code = 2

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericalError(LabError, RuntimeError):
    exit_code = 3


class NonFiniteState(NumericalError):
    """A classical integration step produced NaN or infinity."""


class NonFinite(NumericalError):
    """A wavefunction acquired non-finite amplitudes."""


class MassEscape(NumericalError):
    """Probability mass reached the edge of the periodic grid."""

    def __init__(self, message: str, boundary_mass: float = float("nan"), hbar: Optional[float] = None):
        super().__init__(message, hbar=hbar)
        self.boundary_mass = boundary_mass


class DegenerateWindow(NumericalError):
    pass


class NotHyperbolic(NumericalError):
    pass


class NoFixedPoint(NumericalError):
    pass


class EmptyLevelSet(NumericalError):
    pass


class UnboundedLevelSet(NumericalError):
    pass


class UnsupportedSystem(NumericalError):
    pass


class GridMismatch(NumericalError):
    pass


class MomentumOutOfBand(NumericalError):
    pass


class OrderUnsupported(NumericalError):
    pass


class WindowOutOfRange(NumericalError):
    pass


class OptimizerStalled(NumericalError):
    """The coherent-state search stopped improving before its gradient test passed."""

    def __init__(self, message: str, best: Any = None, hbar: Optional[float] = None):
        super().__init__(message, hbar=hbar)
        self.best = best


class StabilityWarning(RuntimeWarning):
    """Split-operator step is large compared to the state's phase rotation."""
