"""Exception taxonomy shared by the toolkit and mapped to CLI exit codes."""


class MemmeterError(Exception):
    """Base class for all toolkit-specific failures."""


class ConfigError(MemmeterError):
    """Invalid configuration, incompatible shapes, or unusable arguments."""


class DataFormatError(MemmeterError):
    """Malformed input file. Carries the byte offset where parsing failed."""

    def __init__(self, message, *, path=None, offset=None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if offset is not None:
            detail = f"{detail} (byte offset {offset})"
        super().__init__(detail)
        self.path = path
        self.offset = offset


class MeasurementError(MemmeterError):
    """A measurement run produced no usable episodes."""
