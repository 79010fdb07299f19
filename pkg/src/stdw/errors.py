"""Exception types shared across the package.

Every error carries a short ``category`` tag that the command line front end
prints in front of the message.
"""


class StdwError(Exception):
    category = "error"


class ConfigError(StdwError, ValueError):
    category = "config"


class UsageError(StdwError, ValueError):
    category = "usage"


class ShapeError(StdwError, ValueError):
    category = "shape"


class NumericError(StdwError, ArithmeticError):
    category = "numeric"

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class FormatError(StdwError, ValueError):
    category = "format"


class TruncatedFileError(StdwError, OSError):
    category = "io"

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
