"""Exception hierarchy shared across the package."""


class TorusWavesError(Exception):
    """Base class for all package errors."""


class GridMismatch(TorusWavesError, ValueError):
    """Two fields or a field and an operator live on different grids."""


class FitUndefined(TorusWavesError, ValueError):
    """A least-squares fit was requested with fewer than two usable samples."""


class CapExceeded(TorusWavesError, MemoryError):
    """A dense assembly or factorization would exceed the configured size cap."""


class NonRealBeta(TorusWavesError, ValueError):
    """The potential sampled to a field with a non-negligible imaginary part."""


class NumericalFailure(TorusWavesError, ArithmeticError):
    """Base class for failures that map to the 'numerical failure' exit code."""


class NonFinite(NumericalFailure):
    """A NaN or Inf appeared in the state during time integration."""


class StaleCoefficients(TorusWavesError, ValueError):
    """ETDRK4 coefficients were built for a different time step or grid."""


class NotConverged(NumericalFailure):
    """The eigensolver ran out of restarts before all wanted pairs converged."""

    def __init__(self, message, converged=0):
        super().__init__(message)
        self.converged = converged


class SweepBroken(NumericalFailure):
    """Too many viscosities failed during a sweep to keep trajectories meaningful."""


class ZeroXi(NumericalFailure):
    """A phase-space point reached (numerically) zero frequency."""


class ConfigError(TorusWavesError, ValueError):
    """Invalid configuration; carries the dotted key path and line number."""

    def __init__(self, key, message="", line=None):
        self.key = key
        self.line = line
        text = key if not message else f"{key}: {message}"
        if line is not None:
            text = f"{text} (line {line})"
        super().__init__(text)
