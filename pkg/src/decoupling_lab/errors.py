"""Exception types shared across the lab."""


class LabError(Exception):
    """Base class for all lab errors."""


class InvalidScaleError(LabError, ValueError):
    """A length or scale is not dyadic, or scales are nested the wrong way."""


class DomainError(LabError, ValueError):
    """An input lies outside the set an operation is defined on."""


class InvalidExponentError(LabError, ValueError):
    pass


class DegenerateInputError(LabError, ValueError):
    """The computation would divide by zero (e.g. g identically zero)."""


class ResolutionError(LabError, ValueError):
    """The frequency grid is too coarse for the requested cap scale."""


class TransversalityError(LabError, ValueError):
    """A tuple of directions violates the declared transversality bound."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class InsufficientDataError(LabError, ValueError):
    pass
