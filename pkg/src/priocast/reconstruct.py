"""Receiver-side reconstruction from any delivered packet subset.

Whatever arrived is dequantized into place, every missing position is
filled with exactly 0.0, and a synthesis transform (built-in or a
decoder-role network) maps the latent back to a [0, 1]-clamped image.
Quality is summarized as plain MSE, a saliency-weighted MSE over the map
both ends share, and the latent-domain MSE against the fully delivered
quantized latent.

The saliency-weighted MSE is the stand-in headline metric at desk scale:
it emphasizes exactly the regions the codec chose to protect. It is a
proxy, not a task accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import OffloadBitstream, PartialDecode, StreamHeader, deserialize_partial
from .convnet import BuiltinTransform, ConvNetSpec, Role, conv_forward
from .errors import ConfigError, ShapeError
from .netsim import LinkTrace
from .saliency import SaliencyMap


@dataclass
class PartialLatent:
    """Dequantized latent with a presence mask; absent positions hold 0.0."""

    values: np.ndarray  # (L, K, K) float
    mask: np.ndarray  # (L, K, K) bool

    @property
    def delivered_fraction(self) -> float:
        return float(self.mask.mean())


def rebuild_latent(header: StreamHeader, delivered) -> PartialLatent:
    """deserialize_partial followed by dequantization and zero fill."""
    part: PartialDecode = deserialize_partial(header, delivered)
    shape = (header.channels, header.side, header.side)
    values = part.values(header.quant()).reshape(shape)
    return PartialLatent(values=values, mask=part.mask.reshape(shape))


def reference_latent(bitstream: OffloadBitstream) -> np.ndarray:
    """Fully delivered, dequantized latent: the target of latent-domain MSE."""
    return rebuild_latent(bitstream.header, bitstream.packets).values


def inverse_transform(transform, partial: PartialLatent | np.ndarray) -> np.ndarray:
    """Synthesize a (C, H, W) image in [0, 1] from a (partial) latent."""
    values = partial.values if isinstance(partial, PartialLatent) else np.asarray(partial)
    if isinstance(transform, BuiltinTransform):
        image = transform.inverse(values)
    elif isinstance(transform, ConvNetSpec):
        if transform.role != Role.DECODER:
            raise ConfigError(f"expected a decoder-role spec, got {transform.role.name}")
        image = conv_forward(transform, values)
    else:
        raise ConfigError(f"unknown transform {type(transform).__name__}")
    return np.clip(image, 0.0, 1.0)


def latent_mse(partial: PartialLatent, reference: np.ndarray) -> float:
    if partial.values.shape != reference.shape:
        raise ShapeError(f"latent shapes differ: {partial.values.shape} vs {reference.shape}")
    return float(np.mean((partial.values - reference) ** 2))


def _pixel_weights(saliency: SaliencyMap, height: int, width: int) -> np.ndarray:
    """Nearest-neighbour upsample of the map, normalized to mean 1."""
    if height % saliency.side or width % saliency.side:
        raise ShapeError(
            f"image {height}x{width} is not a multiple of map side {saliency.side}"
        )
    by, bx = height // saliency.side, width // saliency.side
    w = np.repeat(np.repeat(saliency.array, by, axis=0), bx, axis=1)
    mean = w.mean()
    if mean == 0.0:
        return np.ones_like(w)
    return w / mean


@dataclass
class QualityReport:
    mse: float | None
    salient_mse: float | None
    delivered_fraction: float
    latent_mse: float | None

    def __post_init__(self):
        for name in ("mse", "salient_mse", "latent_mse"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise ValueError(f"{name} must be non-negative, got {v}")
        if not 0.0 <= self.delivered_fraction <= 1.0:
            raise ValueError(f"delivered_fraction out of range: {self.delivered_fraction}")


def quality(
    original: np.ndarray | None,
    reconstructed: np.ndarray | None,
    saliency: SaliencyMap | None,
    trace: LinkTrace | None = None,
    partial: PartialLatent | None = None,
    reference: np.ndarray | None = None,
) -> QualityReport:
    """Quality metrics for one reconstruction.

    Pixel metrics need both images; the saliency-weighted MSE uses the
    map's values upsampled to the pixel grid, normalized to mean 1.
    latent_mse needs the partial latent and the full dequantized
    reference. delivered_fraction prefers the trace, falling back to the
    partial latent's mask.
    """
    mse = salient = None
    if original is not None and reconstructed is not None:
        a = np.asarray(original, dtype=np.float64)
        b = np.asarray(reconstructed, dtype=np.float64)
        if a.shape != b.shape:
            raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
        err = (a - b) ** 2
        mse = float(err.mean())
        if saliency is not None:
            weights = _pixel_weights(saliency, a.shape[1], a.shape[2])
            salient = float((err * weights[None, :, :]).mean())
    if trace is not None and trace.total_packets:
        delivered_fraction = len(trace.delivered) / trace.total_packets
    elif partial is not None:
        delivered_fraction = partial.delivered_fraction
    else:
        delivered_fraction = 1.0
    lmse = latent_mse(partial, reference) if partial is not None and reference is not None else None
    return QualityReport(
        mse=mse,
        salient_mse=salient,
        delivered_fraction=delivered_fraction,
        latent_mse=lmse,
    )
