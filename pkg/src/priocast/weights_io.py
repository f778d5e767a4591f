"""Binary weights-file format ("LNWF") for network specs.

Little-endian layout:

    magic  "LNWF"                      4 bytes
    version u16                        (currently 1)
    role    u8                         0=encoder 1=decoder 2=saliency
    layer_count u16
    precision u8                       0=float32 1=int8-affine
    per layer, 7 bytes:
        kind u8                        0=conv 1=tconv 2=activation 3=residual-add
        kernel u8                      conv kinds: 3|5|7; activation: function id
                                       (0=relu 1=sigmoid); residual-add: skip distance
        stride u8                      conv kinds: 1|2; otherwise 0
        in_ch u16, out_ch u16
    per conv/tconv layer, weights then bias arrays:
        float32 file:  count x f32
        int8 file:     scale f32, zero_point i32, count x i8
    crc32 u32 over all preceding bytes

The format carries every shape explicitly, so any consistent layer stack
round-trips bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from ._util import append_crc, strip_crc
from .errors import BadMagicError, FormatError
from .convnet import (
    Activation,
    ConvNetSpec,
    LayerKind,
    LayerSpec,
    Precision,
    QuantizedArray,
    Role,
)

MAGIC = b"LNWF"
VERSION = 1


def _layer_param_byte(layer: LayerSpec) -> int:
    if layer.kind in (LayerKind.CONV, LayerKind.TCONV):
        return layer.kernel
    if layer.kind == LayerKind.ACTIVATION:
        return int(layer.activation)
    return layer.skip


def save_weights(spec: ConvNetSpec) -> bytes:
    """Serialize a validated spec; float arrays are stored as float32."""
    spec.validate()
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HBHB", VERSION, int(spec.role), len(spec.layers), int(spec.precision))
    for layer in spec.layers:
        stride = layer.stride if layer.kind in (LayerKind.CONV, LayerKind.TCONV) else 0
        out += struct.pack("<BBBHH", int(layer.kind), _layer_param_byte(layer), stride,
                           layer.in_ch, layer.out_ch)
    for layer in spec.layers:
        if layer.kind not in (LayerKind.CONV, LayerKind.TCONV):
            continue
        if spec.precision == Precision.FLOAT32:
            out += np.asarray(layer.weights, dtype="<f4").tobytes()
            out += np.asarray(layer.bias, dtype="<f4").tobytes()
        else:
            for arr in (layer.weights_q, layer.bias_q):
                out += struct.pack("<fi", arr.scale, arr.zero_point)
                out += arr.q.astype(np.int8).tobytes()
    return bytes(append_crc(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{what}: needs {n} bytes, {len(self.data) - self.pos} remain")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_weights(data: bytes) -> ConvNetSpec:
    """Parse an LNWF byte string back into a ConvNetSpec.

    Raises BadMagicError, ChecksumError or FormatError depending on what
    is wrong; a well-formed file loads to a spec that saves back to the
    identical bytes.
    """
    if data[:4] != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, got {data[:4]!r}")
    payload = strip_crc(data, "weights file")
    rd = _Reader(payload)
    rd.take(4, "magic")
    version, role, count, precision = rd.unpack("<HBHB", "header")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    try:
        role = Role(role)
        precision = Precision(precision)
    except ValueError as e:
        raise FormatError(str(e)) from None

    layers: list[LayerSpec] = []
    for i in range(count):
        kind, param, stride, in_ch, out_ch = rd.unpack("<BBBHH", f"layer {i} header")
        try:
            kind = LayerKind(kind)
        except ValueError:
            raise FormatError(f"layer {i}: unknown kind {kind}") from None
        layer = LayerSpec(kind=kind, in_ch=in_ch, out_ch=out_ch)
        if kind in (LayerKind.CONV, LayerKind.TCONV):
            layer.kernel, layer.stride = param, stride
        elif kind == LayerKind.ACTIVATION:
            try:
                layer.activation = Activation(param)
            except ValueError:
                raise FormatError(f"layer {i}: unknown activation {param}") from None
        else:
            layer.skip = param
        layers.append(layer)

    for i, layer in enumerate(layers):
        if layer.kind not in (LayerKind.CONV, LayerKind.TCONV):
            continue
        wn = layer.weight_count()
        bn = layer.out_ch
        if precision == Precision.FLOAT32:
            layer.weights = np.frombuffer(rd.take(4 * wn, f"layer {i} weights"), dtype="<f4").astype(np.float64)
            layer.bias = np.frombuffer(rd.take(4 * bn, f"layer {i} bias"), dtype="<f4").astype(np.float64)
        else:
            for name, n in (("weights_q", wn), ("bias_q", bn)):
                scale, zp = rd.unpack("<fi", f"layer {i} {name} params")
                q = np.frombuffer(rd.take(n, f"layer {i} {name}"), dtype=np.int8).copy()
                setattr(layer, name, QuantizedArray(q=q, scale=scale, zero_point=zp))
    if rd.pos != len(payload):
        raise FormatError(f"{len(payload) - rd.pos} unexpected trailing bytes")
    return ConvNetSpec(role=role, precision=precision, layers=layers).validate()


def load_weights_file(path) -> ConvNetSpec:
    with open(path, "rb") as f:
        return load_weights(f.read())


def save_weights_file(spec: ConvNetSpec, path) -> None:
    with open(path, "wb") as f:
        f.write(save_weights(spec))
