"""Binary portable pixmap I/O (P6 color, P5 grayscale), 8 bits per sample.

Images are exchanged with the rest of the library as (C, H, W) float
arrays in [0, 1]; grayscale files map to C=1.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError


def _read_tokens(data: bytes, count: int):
    """Yield header tokens, skipping whitespace and '#' comments; returns
    (tokens, offset of the byte after the last token's whitespace)."""
    tokens = []
    i = 0
    while len(tokens) < count:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise FormatError("truncated pixmap header")
        tokens.append(data[start:i])
    return tokens, i + 1  # single whitespace after maxval


def read_pixmap(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"unsupported pixmap type {data[:2]!r} (binary P5/P6 only)")
    channels = 3 if data[:2] == b"P6" else 1
    tokens, offset = _read_tokens(data[2:], 3)
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    raster = np.frombuffer(data, dtype=np.uint8, offset=2 + offset)
    expected = width * height * channels
    if raster.size < expected:
        raise FormatError(f"pixmap raster has {raster.size} bytes, needs {expected}")
    raster = raster[:expected].reshape(height, width, channels)
    return raster.transpose(2, 0, 1).astype(np.float64) / 255.0


def write_pixmap(image: np.ndarray, path) -> None:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise FormatError(f"image must be (1|3, H, W), got shape {image.shape}")
    c, h, w = image.shape
    tag = b"P6" if c == 3 else b"P5"
    raster = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(tag + b"\n%d %d\n255\n" % (w, h))
        f.write(raster.transpose(1, 2, 0).tobytes())
