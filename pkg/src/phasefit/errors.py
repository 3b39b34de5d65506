"""Exception hierarchy shared by all phasefit modules."""


class PhasefitError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMatrix(PhasefitError):
    """A matrix argument violates its contract (non-finite, wrong shape, ...)."""


class DimensionError(PhasefitError):
    """Operands have incompatible dimensions."""


class DomainError(PhasefitError):
    """A scalar argument lies outside its admissible domain (e.g. x < 0)."""


class InvalidSpec(PhasefitError):
    """A structure specification violates one of its constraints."""


class InvalidModel(PhasefitError):
    """A model object is unusable (singular generator, broken invariant)."""


class TailUnderflow(PhasefitError):
    """The survival function underflowed to zero where a ratio or log is needed."""


class InvalidData(PhasefitError):
    """A dataset violates its contract (non-positive value, bad bins, ...)."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class EmptyDataset(PhasefitError):
    """An input contained no observations."""


class FormatError(PhasefitError):
    """An input file does not follow the single-column text convention."""


class InvalidCutPoint(PhasefitError):
    """The cut-point does not lie strictly inside the data range."""


class InsufficientData(PhasefitError):
    """Too few observations for the requested estimation."""


class MissingModel(PhasefitError):
    """A bootstrap p-value was requested without a fitted model."""


class HorizonTooSmall(PhasefitError):
    """The quadrature horizon captures too little of the target density."""


class IoError(PhasefitError):
    """A destination could not be written."""
