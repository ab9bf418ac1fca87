"""Wire format: bit multiplexing, frames, and keyword transports.

Frame layout, all integers big-endian::

    "MTPF" | version | variant | rule | flags | fingerprint (8)
    | s (8, bits) | g_P (2) | g_R (2) | len(A) (4, bytes) | A
    | len(C) (8, bits) | C | CRC32 of everything before it

``A`` holds the sealed keywords, ``C`` the payload: C_P and C_R interleaved
bit by bit (C_P on odd 1-indexed positions), or bare C_P for the basic
variant. Keywords come first so a receiver can derive its keys before the
payload arrives.
"""

from __future__ import annotations

import struct
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Optional

from . import cipher
from .bitstring import BitString, deinterleave, interleave
from .cipher import CipherOutput, Policy, SessionConfig, SessionKeys, Variant
from .keys import Rule, decode_keyword, encode_keyword, pointer_width
from .library import Library, Method

MAGIC = b"MTPF"
VERSION = 0x01
MAX_SEALED = 117

FLAG_COMBINED = 0x01
FLAG_UNINTERLEAVED = 0x02
FLAG_TRUNCATED = 0x04

_HEAD = struct.Struct(">4sBBBB8sQHHI")
_CLEN = struct.Struct(">Q")


class FrameError(ValueError):
    code = 10


class BadMagic(FrameError):
    code = 11


class BadVersion(FrameError):
    code = 12


class TruncatedFrame(FrameError):
    code = 13


class ChecksumMismatch(FrameError):
    code = 14


class FingerprintMismatch(FrameError):
    code = 15


class MalformedFrame(FrameError):
    code = 16


class TransportError(ValueError):
    pass


class PadExhausted(TransportError):
    pass


# -- multiplexing ------------------------------------------------------------

def mux(c_p: BitString, c_r: BitString) -> BitString:
    if c_p.length != c_r.length:
        raise FrameError(f"cannot multiplex C_P of {c_p.length} bits with C_R of {c_r.length} bits")
    return interleave(c_p, c_r)


def demux(c: BitString) -> tuple[BitString, BitString]:
    if c.length % 2:
        raise MalformedFrame(f"multiplexed payload has odd length {c.length}")
    return deinterleave(c)


# -- frames ------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    variant: int
    rule: int
    flags: int
    fingerprint: bytes
    s: int
    g_p: int
    g_r: int
    a_section: bytes
    payload: BitString

    def header_bytes(self) -> bytes:
        return _HEAD.pack(MAGIC, VERSION, self.variant, self.rule, self.flags,
                          self.fingerprint, self.s, self.g_p, self.g_r, len(self.a_section))


def assemble_frame(frame: Frame) -> bytes:
    if len(frame.fingerprint) != 8:
        raise FrameError("library fingerprint must be 8 bytes")
    body = b"".join([
        frame.header_bytes(),
        frame.a_section,
        _CLEN.pack(frame.payload.length),
        frame.payload.to_bytes(),
    ])
    return body + struct.pack(">I", zlib.crc32(body))


def parse_frame(data: bytes, fingerprint: Optional[bytes] = None) -> Frame:
    """Inverse of :func:`assemble_frame`; checks structure, CRC, then fingerprint."""
    if len(data) < 4:
        raise TruncatedFrame("frame shorter than its magic")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad frame magic {data[:4]!r}")
    if len(data) < 5:
        raise TruncatedFrame("frame ends before version byte")
    if data[4] != VERSION:
        raise BadVersion(f"unsupported frame version {data[4]}")
    if len(data) < _HEAD.size:
        raise TruncatedFrame("frame header truncated")
    _, _, variant, rule, flags, fp, s, g_p, g_r, a_len = _HEAD.unpack_from(data)
    pos = _HEAD.size + a_len
    if len(data) < pos + _CLEN.size:
        raise TruncatedFrame("frame ends inside keyword section")
    (c_bits,) = _CLEN.unpack_from(data, pos)
    pos += _CLEN.size
    c_end = pos + (c_bits + 7) // 8
    if len(data) < c_end + 4:
        raise TruncatedFrame("frame ends inside payload")
    if len(data) > c_end + 4:
        raise MalformedFrame(f"{len(data) - c_end - 4} trailing bytes after frame")
    (crc,) = struct.unpack_from(">I", data, c_end)
    if zlib.crc32(data[:c_end]) != crc:
        raise ChecksumMismatch("frame CRC mismatch")
    if fingerprint is not None and fp != fingerprint:
        raise FingerprintMismatch(f"frame made for library {fp.hex()}, have {fingerprint.hex()}")
    payload = BitString.from_bytes(data[pos:c_end], c_bits)
    return Frame(variant, rule, flags, fp, s, g_p, g_r,
                 bytes(data[_HEAD.size:_HEAD.size + a_len]), payload)


# -- keyword transports ------------------------------------------------------

class KeywordTransport(ABC):
    """Secure channel for keywords. Sealing must preserve length."""

    max_size = MAX_SEALED

    def _check(self, w: bytes) -> None:
        if len(w) > self.max_size:
            raise TransportError(f"keyword of {len(w)} bytes exceeds the {self.max_size}-byte bound")

    @abstractmethod
    def seal(self, w: bytes, recipient: Optional[str] = None) -> bytes: ...

    @abstractmethod
    def open(self, a: bytes, identity: Optional[str] = None) -> bytes: ...


class NullTransport(KeywordTransport):
    """Identity channel. Tests only."""

    def seal(self, w: bytes, recipient: Optional[str] = None) -> bytes:
        self._check(w)
        return bytes(w)

    def open(self, a: bytes, identity: Optional[str] = None) -> bytes:
        self._check(a)
        return bytes(a)


class PresharedPadTransport(KeywordTransport):
    """XOR with successive, never reused segments of a pre-shared pad.

    Sender and receiver each hold their own instance; both advance through
    the pad in the same order.
    """

    def __init__(self, pad: bytes, offset: int = 0):
        self.pad = bytes(pad)
        self.offset = offset

    def _take(self, n: int) -> bytes:
        if self.offset + n > len(self.pad):
            raise PadExhausted(f"pad has {len(self.pad) - self.offset} bytes left, need {n}")
        seg = self.pad[self.offset:self.offset + n]
        self.offset += n
        return seg

    def seal(self, w: bytes, recipient: Optional[str] = None) -> bytes:
        self._check(w)
        return bytes(x ^ y for x, y in zip(w, self._take(len(w))))

    def open(self, a: bytes, identity: Optional[str] = None) -> bytes:
        self._check(a)
        return bytes(x ^ y for x, y in zip(a, self._take(len(a))))


# -- message level -----------------------------------------------------------

def keyword_bits(lib: Library, g: int) -> int:
    if lib.method is Method.INDEPENDENT_KEYS:
        return lib.config.k
    return g * pointer_width(lib.config.l)


def _nbytes(bits: int) -> int:
    return (bits + 7) // 8


def seal_keywords(cfg: SessionConfig, keys: SessionKeys, transport: KeywordTransport,
                  combined: bool = False) -> tuple[bytes, int, int, int]:
    """Return ``(A-section, flags, g_P, g_R)``."""
    lib = cfg.library
    w_p = encode_keyword(keys.kw_p, lib)
    g_p = keys.kw_p.g
    if cipher.keyword_count(cfg.variant) == 1:
        return transport.seal(w_p.to_bytes()), 0, g_p, 0
    w_r = encode_keyword(keys.kw_r, lib)
    g_r = keys.kw_r.g
    if combined:
        return transport.seal(w_p.concat(w_r).to_bytes()), FLAG_COMBINED, g_p, g_r
    return transport.seal(w_p.to_bytes()) + transport.seal(w_r.to_bytes()), 0, g_p, g_r


def open_keywords(frame: Frame, lib: Library, transport: KeywordTransport):
    variant = Variant(frame.variant)
    bits_p = keyword_bits(lib, frame.g_p)
    a = frame.a_section
    if cipher.keyword_count(variant) == 1:
        if len(a) != _nbytes(bits_p):
            raise MalformedFrame("keyword section has wrong size")
        w_p = BitString.from_bytes(transport.open(a), bits_p)
        return decode_keyword(w_p, lib, frame.g_p), None
    bits_r = keyword_bits(lib, frame.g_r)
    if frame.flags & FLAG_COMBINED:
        if len(a) != _nbytes(bits_p + bits_r):
            raise MalformedFrame("combined keyword section has wrong size")
        w = BitString.from_bytes(transport.open(a), bits_p + bits_r)
        w_p, w_r = w[:bits_p], w[bits_p:]
    else:
        n_p = _nbytes(bits_p)
        if len(a) != n_p + _nbytes(bits_r):
            raise MalformedFrame("keyword section has wrong size")
        w_p = BitString.from_bytes(transport.open(a[:n_p]), bits_p)
        w_r = BitString.from_bytes(transport.open(a[n_p:]), bits_r)
    return decode_keyword(w_p, lib, frame.g_p), decode_keyword(w_r, lib, frame.g_r)


def payload_of(cfg: SessionConfig, out: CipherOutput) -> BitString:
    if out.c_r is None:
        return out.c_p
    return mux(out.c_p, out.c_r)


def build_frame(cfg: SessionConfig, keys: SessionKeys, out: CipherOutput,
                transport: KeywordTransport, combined: bool = False) -> Frame:
    a, flags, g_p, g_r = seal_keywords(cfg, keys, transport, combined)
    if out.c_r is None:
        flags |= FLAG_UNINTERLEAVED
    if cfg.policy is Policy.TRUNCATE:
        flags |= FLAG_TRUNCATED
    return Frame(int(cfg.variant), int(cfg.rule), flags, cfg.library.fingerprint,
                 cfg.s, g_p, g_r, a, payload_of(cfg, out))


def seal_message(cfg: SessionConfig, keys: SessionKeys, out: CipherOutput,
                 transport: KeywordTransport, combined: bool = False) -> bytes:
    return assemble_frame(build_frame(cfg, keys, out, transport, combined))


def session_for(frame: Frame, lib: Library) -> SessionConfig:
    try:
        variant, rule = Variant(frame.variant), Rule(frame.rule)
    except ValueError as exc:
        raise MalformedFrame(str(exc)) from None
    policy = Policy.TRUNCATE if frame.flags & FLAG_TRUNCATED else Policy.ZERO_PAD
    return SessionConfig(variant, rule, lib, s=frame.s, policy=policy)


def receiver_session(frame: Frame, lib: Library, transport: KeywordTransport):
    cfg = session_for(frame, lib)
    kw_p, kw_r = open_keywords(frame, lib, transport)
    return cfg, cipher.receiver_keys(cfg, kw_p, kw_r)


def open_message(data: bytes, lib: Library, transport: KeywordTransport, validity=None):
    """Parse, check and decrypt a frame; returns the plaintext bits."""
    frame = parse_frame(data, lib.fingerprint)
    cfg, keys = receiver_session(frame, lib, transport)
    if frame.flags & FLAG_UNINTERLEAVED:
        out = CipherOutput(frame.payload)
    else:
        out = CipherOutput(*demux(frame.payload))
    return cipher.decrypt(cfg, keys, out, validity)


# -- incremental I/O ---------------------------------------------------------

class BitWriter:
    """Packs a stream of bit strings into whole bytes."""

    def __init__(self):
        self._rest = BitString(0, 0)

    def feed(self, bits: BitString) -> bytes:
        buf = self._rest.concat(bits)
        whole = buf.length - buf.length % 8
        self._rest = buf[whole:]
        return buf[:whole].to_bytes()

    def flush(self) -> bytes:
        out = self._rest.to_bytes()
        self._rest = BitString(0, 0)
        return out


class FrameWriter:
    """Writes a frame whose payload is produced incrementally."""

    def __init__(self, out: BinaryIO, header: Frame, payload_bits: int):
        self._out = out
        self._crc = 0
        self._bits = BitWriter()
        self._remaining = payload_bits
        self._write(header.header_bytes() + header.a_section + _CLEN.pack(payload_bits))

    def _write(self, data: bytes) -> None:
        if data:
            self._crc = zlib.crc32(data, self._crc)
            self._out.write(data)

    def write_bits(self, bits: BitString) -> None:
        if bits.length > self._remaining:
            raise FrameError("payload longer than declared")
        self._remaining -= bits.length
        self._write(self._bits.feed(bits))

    def close(self) -> None:
        if self._remaining:
            raise FrameError(f"payload {self._remaining} bits short of declared length")
        self._write(self._bits.flush())
        self._out.write(struct.pack(">I", self._crc))
        self._out.flush()


class FrameReader:
    """Reads the header and keyword section, then yields the payload in chunks.

    The CRC is verified after the last payload chunk; callers that act on
    early chunks must treat a final :class:`ChecksumMismatch` as fatal.
    """

    def __init__(self, src: BinaryIO, fingerprint: Optional[bytes] = None):
        self._src = src
        self._crc = 0
        head = self._read(_HEAD.size, "frame header")
        if head[:4] != MAGIC:
            raise BadMagic(f"bad frame magic {head[:4]!r}")
        if head[4] != VERSION:
            raise BadVersion(f"unsupported frame version {head[4]}")
        _, _, variant, rule, flags, fp, s, g_p, g_r, a_len = _HEAD.unpack(head)
        a = self._read(a_len, "keyword section")
        (self.payload_bits,) = _CLEN.unpack(self._read(_CLEN.size, "payload length"))
        self.header = Frame(variant, rule, flags, fp, s, g_p, g_r, a, BitString(0, 0))
        self.fingerprint_ok = fingerprint is None or fp == fingerprint
        if not self.fingerprint_ok:
            raise FingerprintMismatch(f"frame made for library {fp.hex()}, have {fingerprint.hex()}")

    def _read(self, n: int, what: str) -> bytes:
        data = self._src.read(n)
        if len(data) != n:
            raise TruncatedFrame(f"stream ended inside {what}")
        self._crc = zlib.crc32(data, self._crc)
        return data

    def payload_chunks(self, chunk_bytes: int = 4096) -> Iterator[BitString]:
        left = self.payload_bits
        while left > 0:
            nbytes = min(chunk_bytes, _nbytes(left))
            data = self._read(nbytes, "payload")
            bits = min(8 * nbytes, left)
            left -= bits
            yield BitString.from_bytes(data, bits)
        trailer = self._src.read(4)
        if len(trailer) != 4:
            raise TruncatedFrame("stream ended before CRC")
        if struct.unpack(">I", trailer)[0] != self._crc:
            raise ChecksumMismatch("frame CRC mismatch")
