"""Exception hierarchy.

Validation problems (bad specs, configs, files) derive from
:class:`ValidationError`; numerical breakdowns derive from
:class:`NumericalError`. The CLI maps the two families to exit codes 1 and 2.
"""


class ManifoldSysidError(Exception):
    """Base class for all package errors."""


class ValidationError(ManifoldSysidError, ValueError):
    """Invalid user input: specs, configs, files, dimensions."""


class SpecError(ValidationError):
    """A signal or system specification violates its invariants."""


class ConfigError(ValidationError):
    """A run configuration failed schema validation."""


class DatasetFormatError(ValidationError):
    """A dataset file is not a well-formed dataset document."""


class DimensionMismatchError(ValidationError):
    """Array or parameter dimensions are inconsistent."""


class NonFiniteValueError(ValidationError):
    """Stored or supplied data contains NaN or infinite values."""


class CheckpointError(ValidationError):
    """A checkpoint file is malformed."""


class CheckpointKindError(CheckpointError):
    """A checkpoint of the wrong kind was supplied."""


class ConstantOutputError(ValidationError):
    """The reference output is constant, so the fit index is undefined."""


class NumericalError(ManifoldSysidError, ArithmeticError):
    """A computation produced non-finite values."""


class DivergenceError(NumericalError):
    """A simulation, rollout or optimizer diverged.

    ``index`` holds the sample, step or iteration at which the first
    non-finite value appeared.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NonFiniteError(NumericalError):
    """A loss or gradient evaluation returned non-finite values."""
