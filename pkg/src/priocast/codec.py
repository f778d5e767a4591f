"""Latent quantization, stream header, packetization and their inverses.

Wire layout (little-endian). StreamHeader:

    magic "LNOB"     4 bytes
    version u16      (currently 1)
    L u16, K u16     latent shape
    g u16            priority step in unsigned 8.8 fixed point; the encoder
                     snaps g to this grid before scoring so both ends rank
                     positions identically
    channel_order u8 0=descending (channel 0 first), 1=ascending
    entropy u8       0=raw 6-bit fields, 1=per-packet canonical Huffman
    flags u8         bit0: degenerate quantization range (all-zero latent)
    lo f32, hi f32   quantization range (contains 0 so absent values decode
                     to exactly "no contribution")
    wire saliency    40 bytes (8x8 cells, 5 bits each, MSB-first)
    code lengths     64 x u8, Huffman mode only

Bitstream files append a packet section: payload_size u16, packet_count
u16, then each packet as seq u16 + payload. Payloads are uniform length
(zero-bit padded) and independently decodable:

    raw:      fixed 6-bit fields, value index = seq * floor(payload_bits/6)
    huffman:  start u16, count u16, then ``count`` code words

Packet ordering is derived from the *reconstructed* wire saliency (never
the raw map), so the decoder recomputes the identical priority permutation
from the header alone.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import huffman
from ._util import round_half_away
from .errors import BadMagicError, CorruptPacketError, FormatError, ShapeError
from .saliency import WIRE_BYTES, SaliencyMap, WireSaliency, downsize_quantize, reconstruct_map
from .scoring import ChannelOrder, gradual_scoring, priority_order

MAGIC = b"LNOB"
VERSION = 1
LATENT_BITS = 6  # stream format fixes the latent quantizer at 6 bits


class EntropyMode:
    RAW = 0
    HUFFMAN = 1


@dataclass(frozen=True)
class QuantParams:
    """Uniform quantizer over [lo, hi] with 2**bits levels."""

    lo: float
    hi: float
    bits: int = LATENT_BITS

    def __post_init__(self):
        if not 1 <= self.bits <= 8:
            raise ValueError(f"bits must be in [1, 8], got {self.bits}")
        if self.lo > self.hi:
            raise ValueError(f"lo {self.lo} > hi {self.hi}")

    @property
    def levels(self) -> int:
        return (1 << self.bits) - 1

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @classmethod
    def for_latent(cls, z: np.ndarray, bits: int = LATENT_BITS) -> "QuantParams":
        """Per-image range, widened to contain 0 so a missing value can be
        filled with exactly 0.0 ("no contribution"). Snapped to float32
        because that is how the header stores it."""
        lo = min(0.0, float(z.min()))
        hi = max(0.0, float(z.max()))
        return cls(lo=float(np.float32(lo)), hi=float(np.float32(hi)), bits=bits)


def quantize_latent(z: np.ndarray, q: QuantParams) -> np.ndarray:
    """Map values to integer levels 0..2**bits-1 (round half away, clamped)."""
    z = np.asarray(z, dtype=np.float64)
    if q.degenerate:
        return np.zeros(z.shape, dtype=np.uint8)
    t = (z - q.lo) / (q.hi - q.lo) * q.levels
    return np.clip(round_half_away(t), 0, q.levels).astype(np.uint8)


def dequantize_levels(levels: np.ndarray, q: QuantParams) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.float64)
    if q.degenerate:
        return np.zeros(levels.shape)
    return q.lo + levels * (q.hi - q.lo) / q.levels


@dataclass(frozen=True)
class CodecConfig:
    g: float = 0.2
    channel_order: ChannelOrder = ChannelOrder.DESCENDING
    entropy: int = EntropyMode.RAW
    payload_bytes: int = 48

    def __post_init__(self):
        if not (self.g >= 0.0):
            raise ValueError(f"g must be non-negative, got {self.g}")
        if self.payload_bytes < 5:
            raise ValueError("payload must be at least 5 bytes")


def snap_g(g: float) -> int:
    """Quantize g to unsigned 8.8 fixed point (the header's resolution)."""
    fixed = int(round_half_away(g * 256.0))
    if not 0 <= fixed <= 0xFFFF:
        raise ValueError(f"g {g} out of 8.8 fixed-point range")
    return fixed


@dataclass
class StreamHeader:
    channels: int
    side: int
    g_fixed: int
    channel_order: ChannelOrder
    entropy: int
    degenerate: bool
    lo: float
    hi: float
    wire: WireSaliency
    code_lengths: np.ndarray | None = None
    version: int = VERSION

    @property
    def g(self) -> float:
        return self.g_fixed / 256.0

    @property
    def total_values(self) -> int:
        return self.channels * self.side * self.side

    def quant(self) -> QuantParams:
        return QuantParams(lo=self.lo, hi=self.hi, bits=LATENT_BITS)

    def saliency(self) -> SaliencyMap:
        return reconstruct_map(self.wire, self.side)

    def priority(self) -> np.ndarray:
        """Recompute the transmission permutation from header fields only.

        Memoized per header instance (keyed on the fields it reads) since
        partial decodes of the same stream recompute it frequently.
        """
        key = (self.channels, self.side, self.g_fixed, int(self.channel_order), self.wire.to_bytes())
        cached = self.__dict__.get("_priority_cache")
        if cached is not None and cached[0] == key:
            return cached[1]
        scores = gradual_scoring(self.saliency().array, self.channels, self.g, self.channel_order)
        order = priority_order(scores)
        self.__dict__["_priority_cache"] = (key, order)
        return order

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += MAGIC
        out += struct.pack(
            "<HHHHBBBff",
            self.version,
            self.channels,
            self.side,
            self.g_fixed,
            int(self.channel_order),
            int(self.entropy),
            1 if self.degenerate else 0,
            self.lo,
            self.hi,
        )
        out += self.wire.to_bytes()
        if self.entropy == EntropyMode.HUFFMAN:
            out += np.asarray(self.code_lengths, dtype=np.uint8).tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> tuple["StreamHeader", int]:
        """Parse a header, returning it and the number of bytes consumed."""
        if data[:4] != MAGIC:
            raise BadMagicError(f"expected magic {MAGIC!r}, got {data[:4]!r}")
        fixed = struct.calcsize("<HHHHBBBff")
        if len(data) < 4 + fixed + WIRE_BYTES:
            raise FormatError("truncated stream header")
        version, channels, side, g_fixed, order, entropy, flags, lo, hi = struct.unpack(
            "<HHHHBBBff", data[4 : 4 + fixed]
        )
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        pos = 4 + fixed
        wire = WireSaliency.from_bytes(data[pos : pos + WIRE_BYTES])
        pos += WIRE_BYTES
        lengths = None
        if entropy == EntropyMode.HUFFMAN:
            if len(data) < pos + huffman.ALPHABET:
                raise FormatError("truncated Huffman length table")
            lengths = np.frombuffer(data[pos : pos + huffman.ALPHABET], dtype=np.uint8).copy()
            pos += huffman.ALPHABET
        elif entropy != EntropyMode.RAW:
            raise FormatError(f"unknown entropy mode {entropy}")
        header = cls(
            channels=channels,
            side=side,
            g_fixed=g_fixed,
            channel_order=ChannelOrder(order),
            entropy=entropy,
            degenerate=bool(flags & 1),
            lo=lo,
            hi=hi,
            wire=wire,
            code_lengths=lengths,
            version=version,
        )
        return header, pos


@dataclass(frozen=True)
class Packet:
    seq: int
    payload: bytes


@dataclass
class OffloadBitstream:
    header: StreamHeader
    packets: list[Packet] = field(default_factory=list)

    @property
    def payload_bytes(self) -> int:
        return len(self.packets[0].payload) if self.packets else 0

    def total_payload_bytes(self) -> int:
        return sum(len(p.payload) for p in self.packets)

    def to_bytes(self) -> bytes:
        out = bytearray(self.header.to_bytes())
        out += struct.pack("<HH", self.payload_bytes, len(self.packets))
        for p in self.packets:
            out += struct.pack("<H", p.seq)
            out += p.payload
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "OffloadBitstream":
        header, pos = StreamHeader.from_bytes(data)
        if len(data) < pos + 4:
            raise FormatError("truncated packet section")
        payload_size, count = struct.unpack("<HH", data[pos : pos + 4])
        pos += 4
        packets = []
        for _ in range(count):
            if len(data) < pos + 2 + payload_size:
                raise FormatError("truncated packet")
            (seq,) = struct.unpack("<H", data[pos : pos + 2])
            packets.append(Packet(seq=seq, payload=data[pos + 2 : pos + 2 + payload_size]))
            pos += 2 + payload_size
        if pos != len(data):
            raise FormatError(f"{len(data) - pos} unexpected trailing bytes")
        return cls(header=header, packets=packets)


_BIT_SHIFTS = np.arange(LATENT_BITS - 1, -1, -1, dtype=np.uint8)
_BIT_WEIGHTS = (1 << np.arange(LATENT_BITS - 1, -1, -1)).astype(np.int64)


def _pack_raw(stream_levels: np.ndarray, payload_bytes: int) -> list[bytes]:
    vpp = payload_bytes * 8 // LATENT_BITS
    payloads = []
    for start in range(0, stream_levels.size, vpp):
        chunk = stream_levels[start : start + vpp].astype(np.uint8)
        bits = ((chunk[:, None] >> _BIT_SHIFTS) & 1).reshape(-1)
        payloads.append(np.packbits(bits).tobytes().ljust(payload_bytes, b"\x00"))
    return payloads


def _unpack_raw(payload: bytes, count: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=count * LATENT_BITS)
    return bits.reshape(count, LATENT_BITS).dot(_BIT_WEIGHTS).astype(np.uint8)


def _pack_huffman(stream_levels: np.ndarray, lengths: np.ndarray, payload_bytes: int) -> list[bytes]:
    capacity = (payload_bytes - 4) * 8
    sym_bits = lengths[stream_levels].astype(np.int64)
    if sym_bits.size and int(sym_bits.max()) > capacity:
        raise FormatError("payload too small for the longest code word")
    codes = huffman.canonical_codes(lengths)
    payloads = []
    start = 0
    n = stream_levels.size
    while start < n:
        used = 0
        count = 0
        w = huffman.BitWriter()
        while start + count < n and used + sym_bits[start + count] <= capacity:
            s = int(stream_levels[start + count])
            w.write(int(codes[s]), int(lengths[s]))
            used += int(sym_bits[start + count])
            count += 1
        body = w.getvalue()
        payloads.append(struct.pack("<HH", start, count) + body.ljust(payload_bytes - 4, b"\x00"))
        start += count
    return payloads


def serialize(latent: np.ndarray, saliency: SaliencyMap, config: CodecConfig) -> OffloadBitstream:
    """Quantize, order by priority, entropy-code and packetize one latent."""
    z = np.asarray(latent, dtype=np.float64)
    if z.ndim != 3 or z.shape[1] != z.shape[2]:
        raise ShapeError(f"latent must be L x K x K, got {z.shape}")
    channels, side = z.shape[0], z.shape[1]
    if saliency.side != side:
        raise ShapeError(f"saliency side {saliency.side} != latent side {side}")
    if channels * side * side > 0xFFFF:
        raise FormatError("latent too large for u16 stream indices")

    q = QuantParams.for_latent(z)
    levels = quantize_latent(z, q).reshape(-1)
    wire = downsize_quantize(saliency)
    g_fixed = snap_g(config.g)
    header = StreamHeader(
        channels=channels,
        side=side,
        g_fixed=g_fixed,
        channel_order=config.channel_order,
        entropy=config.entropy,
        degenerate=q.degenerate,
        lo=q.lo,
        hi=q.hi,
        wire=wire,
    )
    order = header.priority()
    stream_levels = levels[order]
    if config.entropy == EntropyMode.RAW:
        payloads = _pack_raw(stream_levels, config.payload_bytes)
    else:
        freqs = np.bincount(stream_levels, minlength=huffman.ALPHABET)
        header.code_lengths = huffman.code_lengths(freqs)
        payloads = _pack_huffman(stream_levels, header.code_lengths, config.payload_bytes)
    packets = [Packet(seq=i, payload=p) for i, p in enumerate(payloads)]
    return OffloadBitstream(header=header, packets=packets)


@dataclass
class PartialDecode:
    """Quantized levels in latent layout plus a presence mask."""

    levels: np.ndarray  # uint8, flat, absent positions 0
    mask: np.ndarray  # bool, flat
    rejected: list[int] = field(default_factory=list)

    def values(self, q: QuantParams) -> np.ndarray:
        """Dequantize present positions; absent positions are exactly 0.0."""
        out = dequantize_levels(self.levels, q)
        out[~self.mask] = 0.0
        return out


def deserialize_partial(header: StreamHeader, delivered) -> PartialDecode:
    """Place whatever packets arrived; a pure function of the delivered set.

    Corrupt packets (overruns, out-of-range indices) are rejected and
    reported while the rest still decode.
    """
    total = header.total_values
    order = header.priority()
    levels = np.zeros(total, dtype=np.uint8)
    mask = np.zeros(total, dtype=bool)
    rejected = []
    decoder = None
    if header.entropy == EntropyMode.HUFFMAN:
        decoder = huffman.Decoder(header.code_lengths)
    for packet in sorted(delivered, key=lambda p: p.seq):
        try:
            if header.entropy == EntropyMode.RAW:
                vpp = len(packet.payload) * 8 // LATENT_BITS
                start = packet.seq * vpp
                if start >= total:
                    raise CorruptPacketError(f"packet {packet.seq}: start {start} beyond stream")
                count = min(vpp, total - start)
                vals = _unpack_raw(packet.payload, count)
            else:
                if len(packet.payload) < 4:
                    raise CorruptPacketError(f"packet {packet.seq}: payload too short")
                start, count = struct.unpack("<HH", packet.payload[:4])
                if start + count > total:
                    raise CorruptPacketError(f"packet {packet.seq}: range beyond stream")
                vals = decoder.decode(packet.payload[4:], count)
        except CorruptPacketError:
            rejected.append(packet.seq)
            continue
        pos = order[start : start + len(vals)]
        levels[pos] = vals
        mask[pos] = True
    return PartialDecode(levels=levels, mask=mask, rejected=rejected)


def deserialize(bitstream: OffloadBitstream) -> np.ndarray:
    """Full-delivery decode back to the quantized level tensor (L, K, K)."""
    part = deserialize_partial(bitstream.header, bitstream.packets)
    if not part.mask.all() or part.rejected:
        raise FormatError("bitstream does not cover every latent position")
    h = bitstream.header
    return part.levels.reshape(h.channels, h.side, h.side)
