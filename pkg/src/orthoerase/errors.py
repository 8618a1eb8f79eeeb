"""Exception hierarchy shared by every module."""

from __future__ import annotations


class OrthoEraseError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(OrthoEraseError, ValueError):
    pass


class ShapeMismatchError(DimensionMismatchError):
    pass


class NonFiniteError(OrthoEraseError, ValueError):
    pass


class ZeroNormError(OrthoEraseError, ArithmeticError):
    pass


class LinearlyDependentError(OrthoEraseError, ArithmeticError):
    """A vector lies (numerically) in the span of the ones before it."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"vector {index} is linearly dependent on its predecessors")


class LinearlyDependentConceptsError(LinearlyDependentError):
    """Target concepts whose value vectors are dependent at some token position."""

    def __init__(self, position: int, index: int):
        self.position = position
        super().__init__(
            index,
            f"target concept {index} is linearly dependent on earlier targets "
            f"at token position {position}",
        )


class SingularGramError(OrthoEraseError, ArithmeticError):
    pass


class NotSymmetricError(OrthoEraseError, ValueError):
    pass


class PromptTooLongError(OrthoEraseError, ValueError):
    pass


class PromptTooShortError(OrthoEraseError, ValueError):
    pass


class NoContentTokenError(OrthoEraseError, ValueError):
    pass


class WrongProvenanceError(OrthoEraseError, ValueError):
    pass


class BasisLayerMismatchError(OrthoEraseError, ValueError):
    pass


class TooFewSamplesError(OrthoEraseError, ValueError):
    pass


class FormatError(OrthoEraseError, ValueError):
    """Malformed on-disk artifact (embedding dump, config file)."""


class InvariantViolation(OrthoEraseError, AssertionError):
    """An internal contract (e.g. SOT row preservation) was broken at runtime."""
