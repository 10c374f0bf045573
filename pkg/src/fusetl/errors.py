"""Exception hierarchy.

Everything raised on purpose derives from :class:`FusetlError`.  Input and
configuration problems are :class:`ValidationError` (CLI exit code 1); broken
files are :class:`FormatError` (CLI exit code 2).
"""


class FusetlError(Exception):
    pass


class ValidationError(FusetlError, ValueError):
    """Bad input values or configuration."""


class ShapeError(ValidationError):
    pass


class RankError(ShapeError):
    pass


class ConfigError(ValidationError):
    pass


class StateError(ValidationError):
    """Optimizer state does not match the parameters it is applied to."""


class ConsistencyError(ValidationError):
    """A derived object (e.g. a freeze plan) no longer matches its model."""


class DegenerateBatchError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class CollisionError(ValidationError):
    pass


class DegenerateLabelsError(ValidationError):
    pass


class DivergenceError(FusetlError, ArithmeticError):
    def __init__(self, epoch, batch, value):
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.value = value


class FormatError(FusetlError):
    """A file does not have the expected binary or text layout."""


class DecodeError(FormatError):
    pass


class VersionError(FormatError):
    pass


class CorruptionError(FormatError):
    pass
