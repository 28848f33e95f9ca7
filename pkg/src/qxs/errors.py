"""Exception taxonomy shared across the package.

Each class maps to one failure category so callers (and the CLI exit-code
table) can tell configuration mistakes, bad input data, contract misuse and
numerical breakdowns apart.
"""


class QxsError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QxsError):
    """A configuration value is invalid or a resource request cannot be met."""


class UsageError(QxsError):
    """An operation was called with arguments that violate its contract."""


class ValidationError(QxsError):
    """A model input failed validation (e.g. a feature outside its domain)."""


class DataError(QxsError):
    """Panel or benchmark data violates the documented schema."""


class NumericalError(QxsError):
    """A numerical routine could not produce a reliable result."""


class TrainingDiverged(NumericalError):
    """Training hit a non-finite loss; carries the failing epoch and batch."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch}: loss={loss!r}"
        )
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
