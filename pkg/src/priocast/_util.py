"""Small numeric and binary helpers used by several modules."""

from __future__ import annotations

import zlib

import numpy as np

from .errors import ChecksumError


def round_half_away(x):
    """Round to nearest integer with halves away from zero.

    Works on scalars and arrays; platform-independent (no banker's
    rounding).
    """
    x = np.asarray(x)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def append_crc(payload: bytes) -> bytes:
    """Append a little-endian CRC32 over ``payload``."""
    return payload + zlib.crc32(payload).to_bytes(4, "little")


def strip_crc(data: bytes, what: str) -> bytes:
    """Verify and remove the trailing CRC32, raising ChecksumError on mismatch."""
    if len(data) < 4:
        raise ChecksumError(f"{what}: file too short to contain a checksum")
    payload, stored = data[:-4], int.from_bytes(data[-4:], "little")
    if zlib.crc32(payload) != stored:
        raise ChecksumError(f"{what}: CRC32 mismatch")
    return payload


def frozen_array(a, dtype=np.float64) -> np.ndarray:
    """Contiguous read-only copy; containers hand these out so tensors are
    safe to share between threads."""
    out = np.ascontiguousarray(a, dtype=dtype).copy()
    out.flags.writeable = False
    return out
