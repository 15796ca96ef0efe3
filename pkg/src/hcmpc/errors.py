"""Exception types shared across the package."""


class HCMPCError(Exception):
    """Base class for package errors."""


class InvalidArgument(HCMPCError, ValueError):
    """Bad dimensions, horizons or parameter values."""


class DegenerateState(HCMPCError, ValueError):
    """A ratio has a zero denominator (typically the state is at the origin)."""


class Inapplicable(HCMPCError, ValueError):
    """A bound or estimate cannot be formed under the given inputs.

    The ``reason`` attribute carries a short machine-readable tag.
    """

    def __init__(self, message, reason=None):
        super().__init__(message)
        self.reason = reason or message


class UnsupportedConfiguration(HCMPCError, ValueError):
    """The requested computation is outside what the implementation covers."""


class ConfigError(HCMPCError, ValueError):
    """A configuration file failed to parse or validate.

    ``line`` is the 1-based line number in the file when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc += f"{line}:"
            loc += " "
        elif line is not None:
            loc = f"line {line}: "
        super().__init__(loc + message)
        self.message = message
