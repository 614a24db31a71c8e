"""Exception types shared across the package."""


class DtgvError(Exception):
    """Base class for all errors raised by this package."""


class GridShapeError(DtgvError, ValueError):
    """A grid is too small, or two grid-shaped objects disagree in shape."""


class SpectrumError(DtgvError, ValueError):
    """A frequency-domain operator is inconsistent with a real stencil."""


class DomainError(DtgvError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularFactorError(DtgvError, ArithmeticError):
    """A per-frequency factor of the normal-equations matrix is numerically singular."""


class DivergenceError(DtgvError, ArithmeticError):
    """The solver produced a non-finite iterate."""


class NoDirectionError(DtgvError, RuntimeError):
    """Direction estimation found no dominant direction (blank score curve)."""


class DegradationError(DtgvError, ValueError):
    """The degradation protocol cannot meet its target (e.g. unreachable SNR)."""
