"""Exception hierarchy shared by every package of the transport toolkit."""

from typing import Optional, Sequence

import numpy as np


class TransportError(Exception):
    """Base class for all toolkit errors."""


class NumericalError(TransportError):
    """A numerical procedure failed (CLI exit code 2)."""


class InputError(TransportError):
    """Input data or configuration is invalid (CLI exit code 1)."""


class ConvergenceError(NumericalError):
    """Newton-type solver hit its iteration limit."""

    def __init__(self, message: str, last_iterate: Optional[np.ndarray] = None,
                 gradient_norm: float = float("nan")):
        self.last_iterate = None if last_iterate is None else np.asarray(last_iterate)
        self.gradient_norm = gradient_norm
        super().__init__(f"{message} (gradient sup-norm {gradient_norm:.3e})")


class SingularDesignError(NumericalError):
    """Design or information matrix is singular."""

    def __init__(self, message: str, columns: Sequence[str] = ()):
        self.columns = list(columns)
        if self.columns:
            message = f"{message}: {', '.join(self.columns)}"
        super().__init__(message)


class SeparationError(NumericalError):
    """Logistic model shows perfect or quasi-complete separation."""


class InfeasibleCalibrationError(NumericalError):
    """Target moments cannot be reached by positive weights on the trial sample."""

    def __init__(self, message: str, extremes: Sequence[str] = ()):
        self.extremes = list(extremes)
        if self.extremes:
            message = f"{message}: {'; '.join(self.extremes)}"
        super().__init__(message)


class NegativeDenominatorError(NumericalError):
    """The augmented estimator's denominator dropped to zero or below."""

    def __init__(self, time: float, value: float):
        self.time = time
        self.value = value
        super().__init__(f"augmented denominator is {value:.4g} at time {time:.6g}")


class BootstrapError(NumericalError):
    """Too many bootstrap replicates failed."""


class IngestError(InputError):
    """A data file could not be read into subject records."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(InputError):
    """A run configuration is invalid."""


class EmulationError(InputError):
    """A summary specification cannot be emulated."""

    def __init__(self, message: str, variable: Optional[str] = None):
        self.variable = variable
        if variable is not None:
            message = f"{variable}: {message}"
        super().__init__(message)
