"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ValidationError -> 1,
NumericalError -> 2, AudioIOError (and OSError) -> 3.
"""


class EgeoptError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(EgeoptError):
    """Bad arguments, inconsistent metadata, or config mistakes."""


class ShapeError(ValidationError):
    """Tensor or array shape/dtype mismatch; message carries expected vs actual."""


class UnvoicedUtteranceError(ValidationError):
    """Utterance has too few voiced frames to compute voiced-only functionals."""


class NumericalError(EgeoptError):
    """NaN/Inf encountered, gradient check failed, or training diverged."""


class AudioIOError(EgeoptError):
    """Unreadable or unsupported audio file."""
