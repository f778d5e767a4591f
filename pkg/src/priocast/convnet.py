"""Tensor containers and a minimal convolutional inference engine.

The engine executes the four layer kinds needed by the codec's analysis
and synthesis transforms: strided convolution, transposed convolution,
elementwise activation (relu / sigmoid) and residual add. Networks are
described by in-memory layer specs (see ``weights_io`` for the on-disk
form) and run in either float or int8-affine arithmetic.

Conventions:
  * all spatial layers use "same"-style zero padding p = kernel // 2, so
    a stride-s convolution maps side n to floor((n + 2p - k) / s) + 1 and
    a stride-s transposed convolution maps side n to n * s exactly,
  * int8 inference quantizes each layer's input and output with per-tensor
    affine parameters, accumulates in exact integer arithmetic, and rounds
    half away from zero with saturation.

A parameter-free transform (space-to-depth plus channel-group averaging)
ships alongside the engine so the full pipeline runs without any weight
files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._util import frozen_array, round_half_away
from .errors import NumericOverflowError, ShapeError

VALID_KERNELS = (3, 5, 7)
VALID_STRIDES = (1, 2)


class LayerKind(IntEnum):
    CONV = 0
    TCONV = 1
    ACTIVATION = 2
    RESIDUAL_ADD = 3


class Activation(IntEnum):
    RELU = 0
    SIGMOID = 1


class Role(IntEnum):
    ENCODER = 0
    DECODER = 1
    SALIENCY = 2


class Precision(IntEnum):
    FLOAT32 = 0
    INT8 = 1


@dataclass(frozen=True)
class Image:
    """C x H x W raster with samples in [0, 1], row-major."""

    array: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.array, dtype=np.float64)
        if a.ndim != 3:
            raise ShapeError(f"image must be C x H x W, got ndim={a.ndim}")
        if not np.isfinite(a).all():
            raise ShapeError("image contains non-finite samples")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ShapeError("image samples must lie in [0, 1]")
        object.__setattr__(self, "array", frozen_array(a))

    @property
    def channels(self) -> int:
        return self.array.shape[0]

    @property
    def height(self) -> int:
        return self.array.shape[1]

    @property
    def width(self) -> int:
        return self.array.shape[2]


@dataclass(frozen=True)
class LatentTensor:
    """L x K x K encoded representation (and its partial/quantized variants)."""

    array: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.array, dtype=np.float64)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ShapeError(f"latent must be L x K x K, got shape {a.shape}")
        if not np.isfinite(a).all():
            raise ShapeError("latent contains non-finite values")
        object.__setattr__(self, "array", frozen_array(a))

    @property
    def channels(self) -> int:
        return self.array.shape[0]

    @property
    def side(self) -> int:
        return self.array.shape[1]


@dataclass(frozen=True)
class QuantizedArray:
    """int8 storage with per-tensor affine parameters: x ~ scale * (q - zero_point)."""

    q: np.ndarray
    scale: float
    zero_point: int

    def dequantize(self) -> np.ndarray:
        return self.scale * (self.q.astype(np.float64) - float(self.zero_point))

    @classmethod
    def quantize(cls, a: np.ndarray) -> "QuantizedArray":
        a = np.asarray(a, dtype=np.float64)
        lo, hi = float(a.min()), float(a.max())
        if hi == lo:
            scale = max(abs(hi) / 127.0, 1e-12)
            zp = 0
        else:
            # zero_point is i32 on the wire, so ranges that exclude 0 are fine.
            # The scale is snapped to float32 up front because that is its
            # storage precision; quantizing with the stored value keeps
            # in-memory and reloaded specs bit-identical.
            scale = float(np.float32((hi - lo) / 255.0))
            zp = int(round_half_away(-128.0 - lo / scale))
        q = round_half_away(a / scale + zp)
        q = np.clip(q, -128, 127).astype(np.int8)
        return cls(q=q, scale=scale, zero_point=zp)


@dataclass
class LayerSpec:
    """One layer of a ConvNetSpec.

    ``kernel``/``stride`` apply to conv kinds only. Activation layers carry
    the function in ``activation``; residual layers carry ``skip`` = how
    many layers back the added tensor was fed as input (skip=1 adds the
    previous layer's input).
    """

    kind: LayerKind
    in_ch: int
    out_ch: int
    kernel: int = 0
    stride: int = 1
    activation: Activation | None = None
    skip: int = 0
    weights: np.ndarray | None = None  # (out, in, k, k) float
    bias: np.ndarray | None = None  # (out,) float
    weights_q: QuantizedArray | None = None
    bias_q: QuantizedArray | None = None

    def weight_count(self) -> int:
        return self.out_ch * self.in_ch * self.kernel * self.kernel


@dataclass
class ConvNetSpec:
    """An ordered stack of layers plus role and numeric precision."""

    role: Role
    precision: Precision
    layers: list[LayerSpec] = field(default_factory=list)

    def validate(self):
        prev_out = None
        for i, layer in enumerate(self.layers):
            where = f"layer {i} ({layer.kind.name})"
            if prev_out is not None and layer.in_ch != prev_out:
                raise ShapeError(f"{where}: in_ch {layer.in_ch} != previous out_ch {prev_out}")
            if layer.kind in (LayerKind.CONV, LayerKind.TCONV):
                if layer.kernel not in VALID_KERNELS:
                    raise ShapeError(f"{where}: kernel {layer.kernel} not in {VALID_KERNELS}")
                if layer.stride not in VALID_STRIDES:
                    raise ShapeError(f"{where}: stride {layer.stride} not in {VALID_STRIDES}")
                if self.precision == Precision.INT8:
                    if layer.weights_q is None or layer.bias_q is None:
                        raise ShapeError(f"{where}: int8 spec is missing quantized arrays")
                    wn, bn = layer.weights_q.q.size, layer.bias_q.q.size
                else:
                    if layer.weights is None or layer.bias is None:
                        raise ShapeError(f"{where}: missing weight or bias array")
                    wn, bn = layer.weights.size, layer.bias.size
                if wn != layer.weight_count():
                    raise ShapeError(f"{where}: expected {layer.weight_count()} weights, got {wn}")
                if bn != layer.out_ch:
                    raise ShapeError(f"{where}: expected {layer.out_ch} bias values, got {bn}")
            else:
                if layer.in_ch != layer.out_ch:
                    raise ShapeError(f"{where}: channel counts must match, got {layer.in_ch}->{layer.out_ch}")
                if layer.kind == LayerKind.ACTIVATION and layer.activation is None:
                    raise ShapeError(f"{where}: missing activation function")
                if layer.kind == LayerKind.RESIDUAL_ADD and not (1 <= layer.skip <= i):
                    raise ShapeError(f"{where}: skip {layer.skip} out of range")
            prev_out = layer.out_ch
        return self

    @property
    def in_channels(self) -> int:
        return self.layers[0].in_ch

    @property
    def out_channels(self) -> int:
        return self.layers[-1].out_ch

    def output_side(self, in_side: int) -> int:
        side = in_side
        for layer in self.layers:
            side = _layer_out_side(layer, side)
        return side


def _layer_out_side(layer: LayerSpec, side: int) -> int:
    if layer.kind == LayerKind.CONV:
        p = layer.kernel // 2
        return (side + 2 * p - layer.kernel) // layer.stride + 1
    if layer.kind == LayerKind.TCONV:
        return side * layer.stride
    return side


def _conv2d(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    k = w.shape[-1]
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    return np.einsum("cijab,ocab->oij", win, w)


def _tconv2d(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    # Output side is exactly in * stride (implicit output padding stride-1).
    out_ch, _, k, _ = w.shape
    p = k // 2
    s = stride
    _, h, wd = x.shape
    work = np.zeros((out_ch, (h - 1) * s + k, (wd - 1) * s + k), dtype=x.dtype)
    for a in range(k):
        for b in range(k):
            work[:, a : a + (h - 1) * s + 1 : s, b : b + (wd - 1) * s + 1 : s] += np.einsum(
                "oc,cij->oij", w[:, :, a, b], x
            )
    return work[:, p : p + h * s, p : p + wd * s]


def _activation(x: np.ndarray, fn: Activation) -> np.ndarray:
    if fn == Activation.RELU:
        return np.maximum(x, 0.0)
    return 1.0 / (1.0 + np.exp(-x))


def _quantize_activations(x: np.ndarray) -> QuantizedArray:
    return QuantizedArray.quantize(x)


def _int8_conv(x: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """Integer-accumulated conv/tconv: exact int64 MACs over affine-quantized
    input and stored int8 weights, dequantized at the end."""
    xq = _quantize_activations(x)
    wq = layer.weights_q
    xi = xq.q.astype(np.int64) - xq.zero_point
    wi = wq.q.astype(np.int64) - wq.zero_point
    wi = wi.reshape(layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
    if layer.kind == LayerKind.CONV:
        k = layer.kernel
        p = k // 2
        xp = np.pad(xi, ((0, 0), (p, p), (p, p)))
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, :: layer.stride, :: layer.stride]
        acc = np.einsum("cijab,ocab->oij", win, wi)
    else:
        k = layer.kernel
        p = k // 2
        s = layer.stride
        _, h, wd = xi.shape
        acc = np.zeros((layer.out_ch, (h - 1) * s + k, (wd - 1) * s + k), dtype=np.int64)
        for a in range(k):
            for b in range(k):
                acc[:, a : a + (h - 1) * s + 1 : s, b : b + (wd - 1) * s + 1 : s] += np.einsum(
                    "oc,cij->oij", wi[:, :, a, b], xi
                )
        acc = acc[:, p : p + h * s, p : p + wd * s]
    bias = layer.bias_q.dequantize()
    return xq.scale * wq.scale * acc.astype(np.float64) + bias[:, None, None]


def conv_forward(spec: ConvNetSpec, x: np.ndarray, *, int8: bool | None = None) -> np.ndarray:
    """Run the network on a (C, H, W) array and return the output array.

    Pure function of (spec, x): identical inputs give bit-identical
    outputs. ``int8=None`` follows the spec's precision flag; passing
    True/False forces the arithmetic mode (int8 requires quantized
    arrays in the spec).
    """
    spec.validate()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"input must be C x H x W, got ndim={x.ndim}")
    if x.shape[0] != spec.in_channels:
        raise ShapeError(f"layer 0: expected {spec.in_channels} input channels, got {x.shape[0]}")
    use_int8 = (spec.precision == Precision.INT8) if int8 is None else int8

    inputs: list[np.ndarray] = []
    cur = x
    for i, layer in enumerate(spec.layers):
        where = f"layer {i} ({layer.kind.name})"
        if cur.shape[0] != layer.in_ch:
            raise ShapeError(f"{where}: expected {layer.in_ch} channels, got {cur.shape[0]}")
        inputs.append(cur)
        if layer.kind in (LayerKind.CONV, LayerKind.TCONV):
            if use_int8:
                cur = _int8_conv(cur, layer)
            else:
                w = layer.weights if layer.weights is not None else layer.weights_q.dequantize()
                b = layer.bias if layer.bias is not None else layer.bias_q.dequantize()
                w = w.reshape(layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
                op = _conv2d if layer.kind == LayerKind.CONV else _tconv2d
                cur = op(cur, w, layer.stride) + b[:, None, None]
        elif layer.kind == LayerKind.ACTIVATION:
            cur = _activation(cur, layer.activation)
        else:  # RESIDUAL_ADD
            src = inputs[i - layer.skip]
            if src.shape != cur.shape:
                raise ShapeError(f"{where}: skip tensor shape {src.shape} != current {cur.shape}")
            cur = cur + src
        expected = _layer_out_side(layer, inputs[-1].shape[1])
        if layer.kind in (LayerKind.CONV, LayerKind.TCONV) and cur.shape[1] != expected:
            raise ShapeError(f"{where}: output side {cur.shape[1]} != expected {expected}")
        if not np.isfinite(cur).all():
            raise NumericOverflowError(f"{where}: non-finite intermediate values")
    if use_int8:
        # Final output lives on its own int8 grid, matching what a fully
        # quantized deployment would hand downstream.
        cur = _quantize_activations(cur).dequantize()
    return cur


@dataclass(frozen=True)
class BuiltinTransform:
    """Parameter-free analysis/synthesis pair.

    Analysis: space-to-depth with ``block`` x ``block`` cells, then average
    groups of depth channels down to ``channels`` latent channels.
    Synthesis assigns each latent value back to every sample it averaged
    and inverts the space-to-depth. Both directions are linear; the
    synthesis of an all-zero latent is the all-zero image.
    """

    block: int = 8
    channels: int = 12
    image_channels: int = 3

    def _group(self) -> int:
        depth = self.image_channels * self.block * self.block
        if depth % self.channels != 0:
            raise ShapeError(
                f"{self.channels} latent channels do not evenly divide depth {depth}"
            )
        return depth // self.channels

    def forward(self, image: np.ndarray) -> np.ndarray:
        c, h, w = image.shape
        if c != self.image_channels:
            raise ShapeError(f"expected {self.image_channels}-channel image, got {c}")
        if h != w or h % self.block != 0:
            raise ShapeError(f"image sides must be square multiples of {self.block}, got {h}x{w}")
        k = h // self.block
        g = self._group()
        s2d = (
            image.reshape(c, k, self.block, k, self.block)
            .transpose(0, 2, 4, 1, 3)
            .reshape(c * self.block * self.block, k, k)
        )
        return s2d.reshape(self.channels, g, k, k).mean(axis=1)

    def inverse(self, latent: np.ndarray) -> np.ndarray:
        l, k, _ = latent.shape
        if l != self.channels:
            raise ShapeError(f"expected {self.channels} latent channels, got {l}")
        g = self._group()
        c = self.image_channels
        s2d = np.repeat(latent[:, None], g, axis=1).reshape(c, self.block, self.block, k, k)
        return s2d.transpose(0, 3, 1, 4, 2).reshape(c, k * self.block, k * self.block)

    def latent_side(self, image_side: int) -> int:
        return image_side // self.block
