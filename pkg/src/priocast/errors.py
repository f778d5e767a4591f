"""Exception types shared across the codec, file formats and simulator."""


class PriocastError(Exception):
    """Base class for all library errors."""


class ShapeError(PriocastError):
    """Tensor or layer shapes are inconsistent with the declared network."""


class NumericOverflowError(PriocastError):
    """A layer produced non-finite intermediate values."""


class BadMagicError(PriocastError):
    """A binary file does not start with the expected magic tag."""


class ChecksumError(PriocastError):
    """A binary file failed its CRC32 integrity check."""


class FormatError(PriocastError):
    """A binary file is structurally malformed (bad counts, shapes, ranges)."""


class ConfigError(PriocastError):
    """Invalid or missing configuration (files, providers, parameters)."""


class CorruptPacketError(PriocastError):
    """A packet payload could not be decoded (overrun or bad indices)."""


class CurveError(PriocastError):
    """A rate-quality curve is unusable (too few points, no overlap)."""
