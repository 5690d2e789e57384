"""Exception types raised across the package."""


class VruError(Exception):
    """Base class for all package errors."""


class ParseError(VruError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(VruError):
    pass


class InvalidInputError(VruError, ValueError):
    pass


class DegenerateInputError(VruError, ValueError):
    pass


class MissingChannelError(VruError, KeyError):
    def __init__(self, channel):
        self.channel = channel
        super().__init__(f"missing channel {channel}")

    def __str__(self):
        return self.args[0]


class DegenerateLabelsError(VruError, ValueError):
    pass


class InvalidLabelError(VruError, ValueError):
    pass


class StratificationError(VruError, ValueError):
    pass


class AlignmentError(VruError):
    pass
