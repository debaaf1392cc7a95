"""Exception and warning classes used across wavecast."""


class WavecastError(Exception):
    """Base class for all errors raised by wavecast."""


class DataError(WavecastError, ValueError):
    """Input data is missing, malformed, or insufficient."""


class ShapeError(WavecastError, ValueError):
    """Array dimensions are inconsistent."""


class InvalidSizeError(WavecastError, ValueError):
    """A signal or matrix size is not a power of 4 that is at least 16."""


class InvalidDepthError(WavecastError, ValueError):
    """The requested decomposition depth is too deep for the signal length."""


class StructuralError(WavecastError, ValueError):
    """A filter bank or coefficient container has the wrong structure."""


class UndefinedMetricError(WavecastError, ValueError):
    """A metric is undefined for the given inputs (e.g. R² of constant data)."""


class DivergenceError(WavecastError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped before meeting its tolerance."""
