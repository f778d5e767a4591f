"""Importance maps: detection providers and the 8x8 five-bit wire form.

Three interchangeable providers produce a K x K map in [0, 1]:

  * ``CnnSaliency`` runs a saliency-role network (from a weights file)
    over the latent; the network must end in a sigmoid so outputs are
    bounded.
  * ``ClassicalSaliency`` is a training-free spectral-residual detector
    run on the input image (log-magnitude residual at 64x64, Gaussian
    smoothing sigma 2.5, bilinear resize, min-max normalization).
  * ``FileSaliency`` returns a precomputed map from an "LNSM" file.

For transmission the map is reduced to an 8x8 grid of 5-bit levels
(40 bytes exactly). Both ends of the link derive packet ordering from the
reconstructed wire form, never from the raw map, so their orders cannot
drift apart.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._util import append_crc, frozen_array, round_half_away, strip_crc
from .convnet import Activation, ConvNetSpec, LayerKind, Role, conv_forward
from .errors import BadMagicError, ConfigError, FormatError, ShapeError

WIRE_SIDE = 8
WIRE_LEVELS = 31  # 5-bit cells
WIRE_BYTES = 40  # 64 cells x 5 bits = 320 bits
MAP_MAGIC = b"LNSM"

_WORK_SIDE = 64
_EPS = 1e-9


@dataclass(frozen=True)
class SaliencyMap:
    """K x K importance map with values in [0, 1]."""

    array: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.array, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError(f"saliency map must be square, got shape {a.shape}")
        if not np.isfinite(a).all() or a.min() < 0.0 or a.max() > 1.0:
            raise ShapeError("saliency values must be finite and in [0, 1]")
        object.__setattr__(self, "array", frozen_array(a))

    @property
    def side(self) -> int:
        return self.array.shape[0]


@dataclass(frozen=True)
class WireSaliency:
    """8 x 8 grid of 5-bit levels; serializes to exactly 40 bytes."""

    levels: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels)
        if lv.shape != (WIRE_SIDE, WIRE_SIDE):
            raise ShapeError(f"wire saliency must be 8x8, got {lv.shape}")
        if lv.min() < 0 or lv.max() > WIRE_LEVELS:
            raise ShapeError("wire levels must lie in [0, 31]")
        object.__setattr__(self, "levels", frozen_array(lv, dtype=np.uint8))

    def to_bytes(self) -> bytes:
        """Pack row-major cells, MSB-first within each 5-bit field."""
        acc = 0
        for level in self.levels.reshape(-1):
            acc = (acc << 5) | int(level)
        return int(acc).to_bytes(WIRE_BYTES, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "WireSaliency":
        if len(data) != WIRE_BYTES:
            raise FormatError(f"wire saliency must be {WIRE_BYTES} bytes, got {len(data)}")
        acc = int.from_bytes(data, "big")
        cells = [(acc >> (5 * (63 - i))) & 0x1F for i in range(64)]
        return cls(levels=np.array(cells, dtype=np.uint8).reshape(WIRE_SIDE, WIRE_SIDE))


def downsize_quantize(saliency: SaliencyMap) -> WireSaliency:
    """Block-average the K x K map to 8x8 and quantize each cell to 5 bits.

    Each cell is round-half-away-from-zero of (block mean * 31); K must be
    divisible by 8.
    """
    k = saliency.side
    if k % WIRE_SIDE != 0:
        raise ShapeError(f"map side {k} not divisible by {WIRE_SIDE}")
    b = k // WIRE_SIDE
    blocks = saliency.array.reshape(WIRE_SIDE, b, WIRE_SIDE, b).mean(axis=(1, 3))
    levels = round_half_away(blocks * WIRE_LEVELS).astype(np.uint8)
    return WireSaliency(levels=levels)


def reconstruct_map(wire: WireSaliency, side: int) -> SaliencyMap:
    """Nearest-neighbour upsampling of level/31 back to a K x K map."""
    if side % WIRE_SIDE != 0:
        raise ShapeError(f"target side {side} not divisible by {WIRE_SIDE}")
    b = side // WIRE_SIDE
    values = wire.levels.astype(np.float64) / WIRE_LEVELS
    return SaliencyMap(array=np.repeat(np.repeat(values, b, axis=0), b, axis=1))


def _resize_bilinear(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    ys = np.linspace(0.0, a.shape[0] - 1.0, shape[0])
    xs = np.linspace(0.0, a.shape[1] - 1.0, shape[1])
    grid = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(a, grid, order=1, mode="nearest")


def spectral_residual(image: np.ndarray, side: int) -> SaliencyMap:
    """Training-free saliency from the log-magnitude spectrum residual.

    Flat inputs produce a flat (all-zero) map: the min-max step is guarded
    by a relative range threshold so numerical noise is never stretched to
    full scale.
    """
    gray = np.asarray(image, dtype=np.float64).mean(axis=0)
    g = _resize_bilinear(gray, (_WORK_SIDE, _WORK_SIDE))
    spectrum = np.fft.fft2(g)
    amplitude = np.abs(spectrum)
    log_amp = np.log(amplitude + _EPS)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="nearest")
    field = np.exp(residual) * (spectrum / (amplitude + _EPS))
    sal = np.abs(np.fft.ifft2(field)) ** 2
    sal = ndimage.gaussian_filter(sal, sigma=2.5)
    sal = _resize_bilinear(sal, (side, side))
    lo, hi = sal.min(), sal.max()
    if hi - lo <= 1e-9 * max(abs(hi), 1e-30):
        return SaliencyMap(array=np.zeros((side, side)))
    return SaliencyMap(array=(sal - lo) / (hi - lo))


class ClassicalSaliency:
    """Spectral-residual detector over the input image."""

    def detect(self, image: np.ndarray | None, latent: np.ndarray) -> SaliencyMap:
        if image is None:
            raise ConfigError("classical saliency provider needs the input image")
        return spectral_residual(image, side=latent.shape[-1])


class CnnSaliency:
    """Network branch over the latent, loaded from a saliency-role spec."""

    def __init__(self, spec: ConvNetSpec):
        if spec.role != Role.SALIENCY:
            raise ConfigError(f"expected a saliency-role spec, got {spec.role.name}")
        last = spec.layers[-1]
        if last.kind != LayerKind.ACTIVATION or last.activation != Activation.SIGMOID:
            raise ConfigError("saliency network must end in a sigmoid activation")
        if spec.out_channels != 1:
            raise ConfigError(f"saliency network must emit 1 channel, got {spec.out_channels}")
        self.spec = spec

    def detect(self, image, latent: np.ndarray) -> SaliencyMap:
        out = conv_forward(self.spec, latent)
        return SaliencyMap(array=np.clip(out[0], 0.0, 1.0))


class FileSaliency:
    """Precomputed map loaded from an LNSM file (pass-through)."""

    def __init__(self, path):
        self.map = load_map_file(path)

    def detect(self, image, latent) -> SaliencyMap:
        return self.map


def detect_saliency(provider, image: np.ndarray | None, latent: np.ndarray) -> SaliencyMap:
    """Run whichever provider is configured; always a K x K map in [0, 1]."""
    return provider.detect(image, latent)


def save_map(saliency: SaliencyMap) -> bytes:
    payload = MAP_MAGIC + struct.pack("<H", saliency.side)
    payload += saliency.array.astype("<f4").tobytes()
    return bytes(append_crc(payload))


def load_map(data: bytes) -> SaliencyMap:
    if data[:4] != MAP_MAGIC:
        raise BadMagicError(f"expected magic {MAP_MAGIC!r}, got {data[:4]!r}")
    payload = strip_crc(data, "saliency map file")
    (side,) = struct.unpack("<H", payload[4:6])
    values = np.frombuffer(payload[6:], dtype="<f4")
    if values.size != side * side:
        raise FormatError(f"expected {side * side} values, file has {values.size}")
    return SaliencyMap(array=values.astype(np.float64).reshape(side, side))


def load_map_file(path) -> SaliencyMap:
    try:
        with open(path, "rb") as f:
            return load_map(f.read())
    except FileNotFoundError as e:
        raise ConfigError(f"saliency map file not found: {path}") from e


def save_map_file(saliency: SaliencyMap, path) -> None:
    with open(path, "wb") as f:
        f.write(save_map(saliency))
