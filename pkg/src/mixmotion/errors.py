"""Exception types raised across the package."""


class MixMotionError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MixMotionError, ValueError):
    pass


class EmptyFieldError(MixMotionError):
    """No pixel of the source depth map is usable."""


class ParseError(MixMotionError):
    """A text document could not be parsed; message carries line or field context."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class SchemaError(ParseError):
    pass


class FormatError(MixMotionError):
    """A binary file is malformed (bad magic, truncated payload, ...)."""
