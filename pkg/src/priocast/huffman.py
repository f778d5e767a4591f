"""Canonical Huffman coding over a fixed 64-symbol alphabet.

Only code lengths travel in the stream header (64 bytes); codes are
reassigned canonically on both sides, sorted by (length, symbol). A
histogram with a single used symbol degenerates to a 1-bit code so the
stream stays decodable. Bits are emitted MSB-first.
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import CorruptPacketError, FormatError

ALPHABET = 64


def code_lengths(freqs) -> np.ndarray:
    """Huffman code lengths (uint8, zero for unused symbols) from counts."""
    freqs = np.asarray(freqs, dtype=np.int64)
    if freqs.shape != (ALPHABET,):
        raise FormatError(f"expected {ALPHABET} frequencies, got {freqs.shape}")
    used = np.flatnonzero(freqs > 0)
    lengths = np.zeros(ALPHABET, dtype=np.uint8)
    if used.size == 0:
        return lengths
    if used.size == 1:
        lengths[used[0]] = 1
        return lengths
    # Heap entries: (weight, tiebreak, symbols-under-node); the counter keeps
    # merges deterministic when weights tie.
    heap = [(int(freqs[s]), int(s), [int(s)]) for s in used]
    heapq.heapify(heap)
    counter = ALPHABET
    while len(heap) > 1:
        w1, _, syms1 = heapq.heappop(heap)
        w2, _, syms2 = heapq.heappop(heap)
        for s in syms1 + syms2:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, counter, syms1 + syms2))
        counter += 1
    return lengths


def canonical_codes(lengths) -> np.ndarray:
    """Assign canonical code values (int array, -1 for unused symbols)."""
    lengths = np.asarray(lengths, dtype=np.int64)
    order = sorted(int(s) for s in np.flatnonzero(lengths > 0))
    order.sort(key=lambda s: (lengths[s], s))
    codes = np.full(ALPHABET, -1, dtype=np.int64)
    code = 0
    prev_len = 0
    for s in order:
        code <<= lengths[s] - prev_len
        codes[s] = code
        prev_len = int(lengths[s])
        code += 1
    return codes


class BitWriter:
    def __init__(self):
        self.buf = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, value: int, nbits: int):
        self.acc = (self.acc << nbits) | (value & ((1 << nbits) - 1))
        self.nbits += nbits
        while self.nbits >= 8:
            self.nbits -= 8
            self.buf.append((self.acc >> self.nbits) & 0xFF)
        self.acc &= (1 << self.nbits) - 1

    def getvalue(self) -> bytes:
        # Pad the final partial byte with zero bits.
        if self.nbits:
            self.buf.append((self.acc << (8 - self.nbits)) & 0xFF)
            self.acc = 0
            self.nbits = 0
        return bytes(self.buf)


class BitReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0  # bit position

    def read(self, nbits: int) -> int:
        if self.pos + nbits > 8 * len(self.data):
            raise CorruptPacketError("bit stream overrun")
        out = 0
        for _ in range(nbits):
            byte = self.data[self.pos >> 3]
            out = (out << 1) | ((byte >> (7 - (self.pos & 7))) & 1)
            self.pos += 1
        return out


def encode(symbols, lengths) -> bytes:
    """Encode symbols with the canonical code implied by ``lengths``."""
    codes = canonical_codes(lengths)
    w = BitWriter()
    for s in np.asarray(symbols, dtype=np.int64):
        if codes[s] < 0:
            raise FormatError(f"symbol {s} has no code")
        w.write(int(codes[s]), int(lengths[s]))
    return w.getvalue()


def encoded_bit_length(symbols, lengths) -> int:
    lengths = np.asarray(lengths, dtype=np.int64)
    return int(lengths[np.asarray(symbols, dtype=np.int64)].sum())


class Decoder:
    """Canonical decoder from code lengths (first-code tables per length)."""

    def __init__(self, lengths):
        lengths = np.asarray(lengths, dtype=np.int64)
        used = [int(s) for s in np.flatnonzero(lengths > 0)]
        used.sort(key=lambda s: (lengths[s], s))
        if not used:
            raise FormatError("no symbols have codes")
        self.max_len = int(lengths.max())
        self.first_code = [0] * (self.max_len + 1)
        self.count = [0] * (self.max_len + 1)
        self.offset = [0] * (self.max_len + 1)
        self.symbols = used
        codes = canonical_codes(lengths)
        pos = 0
        for ln in range(1, self.max_len + 1):
            group = [s for s in used if lengths[s] == ln]
            self.count[ln] = len(group)
            self.offset[ln] = pos
            if group:
                self.first_code[ln] = int(codes[group[0]])
            pos += len(group)

    def decode(self, data: bytes, count: int) -> np.ndarray:
        """Decode exactly ``count`` symbols; raises CorruptPacketError on overrun."""
        r = BitReader(data)
        out = np.empty(count, dtype=np.uint8)
        for i in range(count):
            acc = 0
            ln = 0
            while True:
                acc = (acc << 1) | r.read(1)
                ln += 1
                if ln > self.max_len:
                    raise CorruptPacketError("invalid code word")
                idx = acc - self.first_code[ln]
                if self.count[ln] and 0 <= idx < self.count[ln]:
                    out[i] = self.symbols[self.offset[ln] + idx]
                    break
        return out
