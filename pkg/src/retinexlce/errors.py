"""Exception types raised across the package."""


class RetinexError(Exception):
    """Base class for all package errors."""


class InvalidArgument(RetinexError, ValueError):
    pass


class ShapeError(RetinexError, ValueError):
    pass


class ParseError(RetinexError, ValueError):
    pass


class UnsupportedFormat(RetinexError, ValueError):
    pass


class UnsupportedVersion(RetinexError, ValueError):
    pass


class ChannelMismatch(RetinexError, ValueError):
    pass


class DependencyError(RetinexError):
    """A pipeline stage was requested before its upstream checkpoint exists."""


class IoError(RetinexError, OSError):
    pass
