"""Fixed-length bit strings with XOR algebra and cyclic transpositions.

Bit 0 is the first bit of the string. In serialized form bit ``b`` sits in
byte ``b // 8`` at position ``7 - b % 8`` (MSB first); a final partial byte
is padded with zero low-order bits.

Internally the bits are held in a Python int whose most significant bit
(of ``length`` bits) is bit 0, so XOR, popcount and rotations are single
big-int operations.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Union

import numpy as np


def _mask(n: int) -> int:
    return (1 << n) - 1


class BitString:
    """Immutable sequence of ``length`` bits."""

    __slots__ = ("_value", "_length")

    def __init__(self, value: int, length: int):
        if length < 0:
            raise ValueError(f"negative length {length}")
        if value < 0 or value >> length:
            raise ValueError(f"value does not fit in {length} bits")
        self._value = value
        self._length = length

    # -- construction -------------------------------------------------------

    @classmethod
    def zeros(cls, length: int) -> BitString:
        return cls(0, length)

    @classmethod
    def ones(cls, length: int) -> BitString:
        return cls(_mask(length), length)

    @classmethod
    def from_bits(cls, bits: Union[str, Iterable[int]]) -> BitString:
        """Build from ``"1010"`` (spaces and underscores ignored) or an iterable of 0/1."""
        if isinstance(bits, str):
            text = bits.replace(" ", "").replace("_", "")
            if text.strip("01"):
                raise ValueError(f"not a bit string: {bits!r}")
            return cls(int(text, 2) if text else 0, len(text))
        value = 0
        n = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"bit must be 0 or 1, got {b!r}")
            value = (value << 1) | b
            n += 1
        return cls(value, n)

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> BitString:
        """Take the first ``length`` bits of ``data`` (all of it by default)."""
        total = 8 * len(data)
        if length is None:
            length = total
        if length > total:
            raise ValueError(f"{len(data)} bytes cannot hold {length} bits")
        value = int.from_bytes(data, "big") >> (total - length)
        return cls(value, length)

    @classmethod
    def from_hex(cls, text: str, length: int | None = None) -> BitString:
        return cls.from_bytes(bytes.fromhex(text), length)

    @classmethod
    def from_array(cls, bits: np.ndarray) -> BitString:
        bits = np.asarray(bits, dtype=np.uint8)
        return cls.from_bytes(np.packbits(bits).tobytes(), int(bits.size))

    @classmethod
    def random(cls, length: int, entropy) -> BitString:
        """Draw ``length`` bits from any object exposing ``getrandbits``."""
        return cls(entropy.getrandbits(length) if length else 0, length)

    @classmethod
    def join(cls, parts: Iterable[BitString]) -> BitString:
        value = 0
        n = 0
        for p in parts:
            value = (value << p._length) | p._value
            n += p._length
        return cls(value, n)

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        nbytes = (self._length + 7) // 8
        pad = 8 * nbytes - self._length
        return (self._value << pad).to_bytes(nbytes, "big")

    def hex(self) -> str:
        return self.to_bytes().hex()

    def to_array(self) -> np.ndarray:
        raw = np.frombuffer(self.to_bytes(), dtype=np.uint8)
        return np.unpackbits(raw)[: self._length]

    def bits(self) -> str:
        return format(self._value, f"0{self._length}b") if self._length else ""

    # -- accessors ----------------------------------------------------------

    @property
    def length(self) -> int:
        return self._length

    @property
    def value(self) -> int:
        """Integer whose binary expansion, MSB first, is the bit string."""
        return self._value

    def __len__(self) -> int:
        return self._length

    def __getitem__(self, index):
        n = self._length
        if isinstance(index, slice):
            start, stop, step = index.indices(n)
            if step != 1:
                return BitString.from_bits(self[i] for i in range(start, stop, step))
            if stop <= start:
                return BitString(0, 0)
            width = stop - start
            return BitString((self._value >> (n - stop)) & _mask(width), width)
        if index < 0:
            index += n
        if not 0 <= index < n:
            raise IndexError(f"bit index {index} out of range for length {n}")
        return (self._value >> (n - 1 - index)) & 1

    def __iter__(self) -> Iterator[int]:
        for ch in self.bits():
            yield 1 if ch == "1" else 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._length == other._length and self._value == other._value

    def __hash__(self) -> int:
        return hash((self._value, self._length))

    def __repr__(self) -> str:
        if self._length <= 64:
            return f"BitString('{self.bits()}')"
        return f"BitString(length={self._length}, hex={self.hex()[:16]}...)"

    # -- algebra ------------------------------------------------------------

    def __xor__(self, other: BitString) -> BitString:
        if not isinstance(other, BitString):
            return NotImplemented
        if self._length != other._length:
            raise ValueError(
                f"XOR of unequal lengths: {self._length} and {other._length} bits"
            )
        return BitString(self._value ^ other._value, self._length)

    def __invert__(self) -> BitString:
        return BitString(self._value ^ _mask(self._length), self._length)

    def __and__(self, other: BitString) -> BitString:
        if self._length != other._length:
            raise ValueError(
                f"AND of unequal lengths: {self._length} and {other._length} bits"
            )
        return BitString(self._value & other._value, self._length)

    def popcount(self) -> int:
        return self._value.bit_count()

    def parity(self) -> int:
        return self.popcount() & 1

    def rotl(self, k: int = 1) -> BitString:
        """Cyclic shift toward index 0: ``result[i] = self[(i + k) % length]``."""
        n = self._length
        if n == 0:
            raise ValueError("cannot rotate an empty bit string")
        k %= n
        if k == 0:
            return self
        v = self._value
        return BitString(((v << k) | (v >> (n - k))) & _mask(n), n)

    def rotr(self, k: int = 1) -> BitString:
        n = self._length
        if n == 0:
            raise ValueError("cannot rotate an empty bit string")
        return self.rotl(n - k % n)

    def concat(self, other: BitString) -> BitString:
        return BitString((self._value << other._length) | other._value,
                         self._length + other._length)

    def is_constant(self) -> bool:
        return self._value == 0 or self._value == _mask(self._length)


def xor(a: BitString, b: BitString) -> BitString:
    return a ^ b


def xor_all(items: Iterable[BitString], length: int) -> BitString:
    """XOR-fold; the empty fold is the zero string of ``length`` bits."""
    acc = 0
    for item in items:
        if item.length != length:
            raise ValueError(f"XOR of unequal lengths: {length} and {item.length} bits")
        acc ^= item.value
    return BitString(acc, length)


def rotl1(a: BitString) -> BitString:
    return a.rotl(1)


def parity(a: BitString) -> int:
    return a.parity()


def complement(a: BitString) -> BitString:
    return ~a


def interleave(a: BitString, b: BitString) -> BitString:
    """``a[0] b[0] a[1] b[1] ...``; lengths must match."""
    if a.length != b.length:
        raise ValueError(f"cannot interleave {a.length} and {b.length} bits")
    out = np.empty(2 * a.length, dtype=np.uint8)
    out[0::2] = a.to_array()
    out[1::2] = b.to_array()
    return BitString.from_array(out)


def deinterleave(c: BitString) -> tuple[BitString, BitString]:
    if c.length % 2:
        raise ValueError(f"cannot split an odd number of bits ({c.length})")
    bits = c.to_array()
    return BitString.from_array(bits[0::2]), BitString.from_array(bits[1::2])
