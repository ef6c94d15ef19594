"""Prefix-free bit coding: Elias-gamma integers and fixed-width fields."""
from __future__ import annotations

from .errors import DecodeError


class BitWriter:
    def __init__(self):
        self._bits: list = []

    def __len__(self) -> int:
        return len(self._bits)

    def write_bit(self, b: int) -> None:
        self._bits.append(1 if b else 0)

    def write_uint(self, value: int, width: int) -> None:
        if value < 0 or (width < value.bit_length()):
            raise ValueError(f"{value} does not fit in {width} bits")
        for i in range(width - 1, -1, -1):
            self._bits.append((value >> i) & 1)

    def write_int(self, value: int, width: int) -> None:
        """Two's complement in ``width`` bits."""
        if width == 0:
            if value != 0:
                raise ValueError("nonzero value in a zero-width field")
            return
        lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
        if not lo <= value <= hi:
            raise ValueError(f"{value} does not fit in {width}-bit two's complement")
        self.write_uint(value & ((1 << width) - 1), width)

    def write_gamma(self, n: int) -> None:
        """Elias-gamma code of an integer n >= 1."""
        if n < 1:
            raise ValueError("gamma codes integers >= 1")
        k = n.bit_length()
        self._bits.extend([0] * (k - 1))
        self.write_uint(n, k)

    def write_gamma0(self, n: int) -> None:
        """Gamma code of a non-negative integer (shifted by one)."""
        self.write_gamma(n + 1)

    def write_signed(self, v: int) -> None:
        """Gamma code of a signed integer through the zigzag map."""
        self.write_gamma0(2 * v if v >= 0 else -2 * v - 1)

    def extend(self, other: "BitWriter") -> None:
        self._bits.extend(other._bits)

    def bits(self) -> list:
        return list(self._bits)

    def to_hex(self) -> str:
        return bits_to_hex(self._bits)


def bits_to_hex(bits) -> str:
    n = len(bits)
    padded = list(bits) + [0] * (-n % 8)
    out = bytearray()
    for i in range(0, len(padded), 8):
        byte = 0
        for b in padded[i : i + 8]:
            byte = (byte << 1) | b
        out.append(byte)
    return out.hex()


def hex_to_bits(hexstr: str, bit_len: int) -> list:
    data = bytes.fromhex(hexstr)
    if bit_len > 8 * len(data):
        raise DecodeError("bit length exceeds payload")
    bits = []
    for byte in data:
        bits.extend((byte >> (7 - i)) & 1 for i in range(8))
    return bits[:bit_len]


def uint_width(n: int) -> int:
    """Bits needed for unsigned values in [0, n]."""
    return max(int(n).bit_length(), 0)


def int_width(lo: int, hi: int) -> int:
    """Two's complement width holding every value in [lo, hi]."""
    if lo == 0 and hi == 0:
        return 0
    w = 1
    while lo < -(1 << (w - 1)) or hi > (1 << (w - 1)) - 1:
        w += 1
    return w


class BitReader:
    def __init__(self, bits):
        self._bits = list(bits)
        self.pos = 0

    @classmethod
    def from_hex(cls, hexstr: str, bit_len: int) -> "BitReader":
        return cls(hex_to_bits(hexstr, bit_len))

    def remaining(self) -> int:
        return len(self._bits) - self.pos

    def read_bit(self) -> int:
        if self.pos >= len(self._bits):
            raise DecodeError("bitstream exhausted")
        b = self._bits[self.pos]
        self.pos += 1
        return b

    def read_uint(self, width: int) -> int:
        if self.pos + width > len(self._bits):
            raise DecodeError("bitstream exhausted")
        v = 0
        for b in self._bits[self.pos : self.pos + width]:
            v = (v << 1) | b
        self.pos += width
        return v

    def read_int(self, width: int) -> int:
        if width == 0:
            return 0
        v = self.read_uint(width)
        return v - (1 << width) if v >> (width - 1) else v

    def read_gamma(self) -> int:
        zeros = 0
        while self.read_bit() == 0:
            zeros += 1
            if zeros > 4096:
                raise DecodeError("malformed gamma code")
        return (1 << zeros) | self.read_uint(zeros)

    def read_gamma0(self) -> int:
        return self.read_gamma() - 1

    def read_signed(self) -> int:
        z = self.read_gamma0()
        return z // 2 if z % 2 == 0 else -(z + 1) // 2
