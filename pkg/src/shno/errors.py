"""Exception hierarchy shared by every shno subpackage."""

from __future__ import annotations


class ShnoError(Exception):
    """Base class for all errors raised by shno."""


class ConfigError(ShnoError, ValueError):
    """A configuration file or value is invalid."""


class GridCompatibilityError(ShnoError, ValueError):
    """A truncation does not fit on a grid (or two grids disagree)."""


class ShapeError(ShnoError, ValueError):
    """Operands have incompatible shapes."""


class NonFiniteError(ShnoError, ArithmeticError):
    """A NaN or infinity appeared in a computation.

    ``stage`` names where it was detected; ``step`` is set for rollouts.
    """

    def __init__(self, message: str, stage: str = "", step: int | None = None) -> None:
        super().__init__(message)
        self.stage = stage
        self.step = step

    def __reduce__(self) -> tuple[object, ...]:
        return (type(self), (str(self), self.stage, self.step))


class CFLViolationError(ShnoError, ValueError):
    """The time step is too large for the explicit integrator."""


class SolverBlowupError(NonFiniteError):
    """An ensemble member produced non-finite values during integration."""

    def __init__(self, message: str, member: int, step: int | None = None) -> None:
        super().__init__(message, stage="swe_step", step=step)
        self.member = member

    def __reduce__(self) -> tuple[object, ...]:
        return (type(self), (str(self), self.member, self.step))


class ContainerError(ShnoError):
    """Base class for container format errors."""


class BadMagicError(ContainerError):
    pass


class ChecksumError(ContainerError):
    pass


class TruncatedFileError(ContainerError):
    pass


class UnknownDtypeError(ContainerError):
    pass


class DuplicateSectionError(ContainerError):
    pass
