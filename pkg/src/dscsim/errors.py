"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class ChannelAlignmentError(SimError):
    """Input channel count is not a multiple of eight."""


class ChannelLimitError(SimError):
    """A channel dimension exceeds the 1024 cap that keeps 32-bit accumulators safe."""


class BadStrideError(SimError):
    """Stride outside {1, 2}."""


class EmptyDimsError(SimError):
    """A geometry dimension is smaller than 1."""


class OutOfBoundsError(SimError):
    """Tensor coordinate outside the valid range."""


class ShapeMismatchError(SimError):
    """Operand shapes are inconsistent."""


class BadChannelError(SimError):
    """Expanded-channel index out of range."""


class BadIndexError(SimError):
    """Buffer address (filter index, chunk index, engine id) out of range."""


class BadMagicError(SimError):
    """Tensor stream does not start with the QTSR magic."""


class VersionMismatchError(SimError):
    """Tensor stream carries an unsupported format version."""


class TruncatedStreamError(SimError):
    """Tensor stream ended before the declared payload."""


class ConfigParseError(SimError):
    """Config text could not be parsed; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
