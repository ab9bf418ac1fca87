"""Basic-key libraries: generation, lookup, GF(2) rank, file format.

Two kinds of library exist:

* ``INDEPENDENT_KEYS`` (method 1): ``k`` independently drawn keys of ``s``
  bits, serial numbers ``1..k``.
* ``MASTER_STRING`` (method 2): one master string of ``l`` bits. Basic key
  ``q`` is the ``s``-bit window starting at position ``q`` (1-indexed) of the
  string read as a loop.

Serials and pointers are 1-indexed at this module's API.
"""

from __future__ import annotations

import enum
import hashlib
import struct
import zlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .bitstring import BitString
from .entropy import EntropyExhausted, RandomBitSource

MAGIC = b"MTPL"
VERSION = 0x01
# High bit of the method byte marks a library drawn from a seeded test source.
TEST_TAG = 0x80


class LibraryError(ValueError):
    pass


class LibraryFormatError(LibraryError):
    pass


class Method(enum.IntEnum):
    INDEPENDENT_KEYS = 1
    MASTER_STRING = 2


class Generator(enum.Enum):
    EXTERNAL = "external-entropy"
    SEEDED_TEST = "seeded-test"


@dataclass(frozen=True)
class LibraryConfig:
    method: Method
    s: int
    k: int = 0
    l: int = 0

    def __post_init__(self):
        if self.method is Method.INDEPENDENT_KEYS:
            if self.k < 1 or self.s < 1:
                raise LibraryError(f"method 1 needs k >= 1 and s >= 1 (k={self.k}, s={self.s})")
        elif self.method is Method.MASTER_STRING:
            if not self.l >= self.s >= 1:
                raise LibraryError(f"method 2 needs l >= s >= 1 (l={self.l}, s={self.s})")
        else:
            raise LibraryError(f"unknown method {self.method!r}")

    @property
    def num_basic_keys(self) -> int:
        return self.k if self.method is Method.INDEPENDENT_KEYS else self.l

    def file_size(self) -> int:
        """Size in bytes of the serialized library."""
        if self.method is Method.INDEPENDENT_KEYS:
            return 6 + 4 + 8 + self.k * ((self.s + 7) // 8) + 4
        return 6 + 8 + (self.l + 7) // 8 + 4


@dataclass(frozen=True, eq=False)
class Library:
    config: LibraryConfig
    keys: tuple[BitString, ...] = ()
    master: BitString | None = None
    generator: Generator = Generator.EXTERNAL

    def __post_init__(self):
        cfg = self.config
        if cfg.method is Method.INDEPENDENT_KEYS:
            if len(self.keys) != cfg.k:
                raise LibraryError(f"expected {cfg.k} keys, got {len(self.keys)}")
            for i, key in enumerate(self.keys, 1):
                if key.length != cfg.s:
                    raise LibraryError(f"key {i} has {key.length} bits, expected {cfg.s}")
        else:
            if self.master is None or self.master.length != cfg.l:
                raise LibraryError(f"master string must have {cfg.l} bits")

    @property
    def method(self) -> Method:
        return self.config.method

    @property
    def s(self) -> int:
        return self.config.s

    @property
    def num_basic_keys(self) -> int:
        return self.config.num_basic_keys

    def basic_key(self, ident: int, s: int | None = None) -> BitString:
        """Key with serial ``ident`` (method 1) or the window at pointer ``ident`` (method 2)."""
        cfg = self.config
        if s is None:
            s = cfg.s
        if cfg.method is Method.INDEPENDENT_KEYS:
            if not 1 <= ident <= cfg.k:
                raise LibraryError(f"serial number {ident} outside 1..{cfg.k}")
            if s != cfg.s:
                raise LibraryError(f"method 1 keys have {cfg.s} bits, requested {s}")
            return self.keys[ident - 1]
        if not 1 <= ident <= cfg.l:
            raise LibraryError(f"pointer {ident} outside 1..{cfg.l}")
        if not 1 <= s <= cfg.l:
            raise LibraryError(f"window length {s} outside 1..{cfg.l}")
        return _window(self.master, ident - 1, s)

    @cached_property
    def serialized(self) -> bytes:
        return dumps(self)

    @cached_property
    def fingerprint(self) -> bytes:
        """8-byte digest of the serialized library."""
        return hashlib.blake2b(self.serialized, digest_size=8).digest()


def _window(master: BitString, start: int, s: int) -> BitString:
    l = master.length
    end = start + s
    if end <= l:
        return master[start:end]
    return master[start:].concat(master[: end - l])


def generate(config: LibraryConfig, entropy: RandomBitSource,
             generator: Generator = Generator.EXTERNAL) -> Library:
    """Fill a library from ``entropy``; method 1 keys are drawn one after another."""
    try:
        if config.method is Method.INDEPENDENT_KEYS:
            keys = tuple(BitString.random(config.s, entropy) for _ in range(config.k))
            return Library(config, keys=keys, generator=generator)
        return Library(config, master=BitString.random(config.l, entropy), generator=generator)
    except EntropyExhausted as exc:
        raise EntropyExhausted(f"library generation ran out of entropy: {exc}") from exc


@dataclass(frozen=True)
class RankReport:
    rank: int
    k: int
    dependent: tuple[int, ...]

    @property
    def full_rank(self) -> bool:
        return self.rank == self.k


def rank_gf2(lib: Library) -> RankReport:
    """Rank of the k x s matrix of basic keys over GF(2).

    Keys are inserted in serial order into an XOR basis keyed by leading bit;
    a key that reduces to zero is reported as dependent on earlier ones.
    """
    if lib.method is not Method.INDEPENDENT_KEYS:
        raise LibraryError("rank is only defined for method 1 libraries")
    basis: dict[int, int] = {}
    dependent = []
    for serial, key in enumerate(lib.keys, 1):
        row = key.value
        while row:
            lead = row.bit_length() - 1
            pivot = basis.get(lead)
            if pivot is None:
                basis[lead] = row
                break
            row ^= pivot
        else:
            dependent.append(serial)
    return RankReport(len(basis), lib.config.k, tuple(dependent))


# -- file format -------------------------------------------------------------

def dumps(lib: Library) -> bytes:
    cfg = lib.config
    method = int(cfg.method)
    if lib.generator is Generator.SEEDED_TEST:
        method |= TEST_TAG
    parts = [MAGIC, bytes([VERSION, method])]
    if cfg.method is Method.INDEPENDENT_KEYS:
        parts.append(struct.pack(">IQ", cfg.k, cfg.s))
        parts.extend(key.to_bytes() for key in lib.keys)
    else:
        parts.append(struct.pack(">Q", cfg.l))
        parts.append(lib.master.to_bytes())
    body = b"".join(parts)
    return body + struct.pack(">I", zlib.crc32(body))


def loads(data: bytes) -> Library:
    if len(data) < 10:
        raise LibraryFormatError("library file truncated")
    if data[:4] != MAGIC:
        raise LibraryFormatError(f"bad magic {data[:4]!r}")
    if data[4] != VERSION:
        raise LibraryFormatError(f"unsupported library version {data[4]}")
    (crc,) = struct.unpack(">I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise LibraryFormatError("library CRC mismatch")
    generator = Generator.SEEDED_TEST if data[5] & TEST_TAG else Generator.EXTERNAL
    try:
        method = Method(data[5] & ~TEST_TAG)
    except ValueError:
        raise LibraryFormatError(f"unknown method byte {data[5]:#04x}") from None
    body = data[6:-4]
    if method is Method.INDEPENDENT_KEYS:
        if len(body) < 12:
            raise LibraryFormatError("library header truncated")
        k, s = struct.unpack(">IQ", body[:12])
        stride = (s + 7) // 8
        if len(body) != 12 + k * stride:
            raise LibraryFormatError("library key section has wrong size")
        keys = tuple(
            BitString.from_bytes(body[12 + i * stride: 12 + (i + 1) * stride], s)
            for i in range(k)
        )
        lib = Library(LibraryConfig(method, s=s, k=k), keys=keys, generator=generator)
    else:
        if len(body) < 8:
            raise LibraryFormatError("library header truncated")
        (l,) = struct.unpack(">Q", body[:8])
        if len(body) != 8 + (l + 7) // 8:
            raise LibraryFormatError("master string has wrong size")
        master = BitString.from_bytes(body[8:], l)
        # s is not stored for method 2; windows may be as long as l.
        lib = Library(LibraryConfig(method, s=l, l=l), master=master, generator=generator)
    lib.__dict__["serialized"] = bytes(data)
    return lib


def save(lib: Library, path) -> None:
    Path(path).write_bytes(lib.serialized)


def load(path) -> Library:
    return loads(Path(path).read_bytes())
