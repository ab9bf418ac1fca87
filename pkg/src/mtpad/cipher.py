"""The augmented cipher, its variations, and incremental stream sessions.

Every variant is a choice of which keys enter the two ciphertexts::

    variant   C_P                    C_R
    MAIN      P ^ K_P ^ R1 ^ R2      R1 ^ K_R
    VAR_A     P ^ K_P ^ R1           R1 ^ R2 ^ K_R
    VAR_B     P ^ R1 ^ R2            R1 ^ K_R
    VAR_C     P ^ R2                 R1 ^ K_R
    VAR_D     P ^ K_P ^ R2           R1 ^ K_R
    VAR_E     P ^ K ^ R1 ^ R2        R1 ^ K        (single private key K)
    BASIC_F   P ^ K_P                -

R2 is derived from R1 by the session's rule; rule B is keyed by K_P (by K
for VAR_E). VAR_B and VAR_C still carry a K_P keyword, which only feeds
rule B.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Union

from .bitstring import BitString, deinterleave, interleave
from .entropy import RandomBitSource
from .keys import (
    GBounds,
    InconsistentSum,
    Keyword,
    Rule,
    apply_rule,
    derive_private_key,
    generate_r1,
    recover_r1_from_sum_rule_a,
    sample_keyword,
)
from .library import Library, Method


class CipherError(ValueError):
    pass


class CorruptCiphertext(CipherError):
    pass


class KeyReuseWarning(UserWarning):
    pass


class Variant(enum.IntEnum):
    MAIN = 0
    VAR_A = 1
    VAR_B = 2
    VAR_C = 3
    VAR_D = 4
    VAR_E = 5
    BASIC_F = 6


class Policy(enum.Enum):
    ZERO_PAD = "zero-pad"
    TRUNCATE = "truncate"


@dataclass(frozen=True)
class _Terms:
    cp: frozenset
    cr: Optional[frozenset]


_TERMS = {
    Variant.MAIN: _Terms(frozenset({"kp", "r1", "r2"}), frozenset({"r1", "kr"})),
    Variant.VAR_A: _Terms(frozenset({"kp", "r1"}), frozenset({"r1", "r2", "kr"})),
    Variant.VAR_B: _Terms(frozenset({"r1", "r2"}), frozenset({"r1", "kr"})),
    Variant.VAR_C: _Terms(frozenset({"r2"}), frozenset({"r1", "kr"})),
    Variant.VAR_D: _Terms(frozenset({"kp", "r2"}), frozenset({"r1", "kr"})),
    Variant.VAR_E: _Terms(frozenset({"kp", "r1", "r2"}), frozenset({"r1", "kr"})),
    Variant.BASIC_F: _Terms(frozenset({"kp"}), None),
}


def keyword_count(variant: Variant) -> int:
    return 1 if variant in (Variant.VAR_E, Variant.BASIC_F) else 2


def has_random_key(variant: Variant) -> bool:
    return variant is not Variant.BASIC_F


@dataclass(frozen=True)
class SessionConfig:
    variant: Variant
    rule: Rule
    library: Library
    bounds: Optional[GBounds] = None
    s: Optional[int] = None
    policy: Policy = Policy.ZERO_PAD

    def __post_init__(self):
        lib = self.library
        if self.s is None:
            object.__setattr__(self, "s", lib.s)
        if self.bounds is None:
            object.__setattr__(self, "bounds", GBounds.full(lib))
        if lib.method is Method.INDEPENDENT_KEYS and self.s != lib.s:
            raise CipherError(f"method 1 sessions use the key length s={lib.s}, got {self.s}")
        if lib.method is Method.MASTER_STRING and not 1 <= self.s <= lib.config.l:
            raise CipherError(f"session length {self.s} outside 1..{lib.config.l}")
        if self.variant is Variant.VAR_A and self.rule is not Rule.A:
            raise CipherError("variant A needs rule A to recover R1 from R1 ^ R2")
        self.bounds.check(lib)

    @property
    def terms(self) -> _Terms:
        return _TERMS[self.variant]


@dataclass(frozen=True)
class SessionKeys:
    """Keywords plus derived keys. ``r1`` is ``None`` on the receiver side."""

    kw_p: Keyword
    k_p: BitString
    kw_r: Optional[Keyword] = None
    k_r: Optional[BitString] = None
    r1: Optional[BitString] = None
    rule: Rule = Rule.A

    @property
    def r2(self) -> Optional[BitString]:
        if self.r1 is None:
            return None
        if self.r1.length == 0:
            return self.r1
        return apply_rule(self.rule, self.r1, self.k_p)

    def truncated(self, n: int) -> SessionKeys:
        """All keys cut to ``n`` bits; R2 follows from the cut R1 and K_P."""
        cut = lambda x: None if x is None else x[:n]
        return replace(self, k_p=self.k_p[:n], k_r=cut(self.k_r), r1=cut(self.r1))


class CipherOutput(NamedTuple):
    c_p: BitString
    c_r: Optional[BitString] = None


class Ambiguous(NamedTuple):
    """Variant A decryption that could not choose between R1 and its complement."""

    first: BitString
    second: BitString


@dataclass
class KeyReuseRegistry:
    """Warns when a private-key selection repeats within one registry's scope."""

    seen: set = field(default_factory=set)

    def note(self, kw: Keyword) -> None:
        key = (kw.method, kw.selection)
        if key in self.seen:
            warnings.warn(f"private key selection reused (g={kw.g})", KeyReuseWarning, stacklevel=3)
        self.seen.add(key)


def new_session_keys(cfg: SessionConfig, entropy: RandomBitSource,
                     registry: Optional[KeyReuseRegistry] = None) -> SessionKeys:
    """Sender side: sample keywords (K_P and K_R independently) and a fresh R1."""
    lib = cfg.library
    kw_p = sample_keyword(lib, cfg.bounds, entropy)
    kw_r = None
    if keyword_count(cfg.variant) == 2:
        kw_r = sample_keyword(lib, cfg.bounds, entropy)
    if registry is not None:
        registry.note(kw_p)
        if kw_r is not None:
            registry.note(kw_r)
    r1 = generate_r1(cfg.s, entropy) if has_random_key(cfg.variant) else None
    return receiver_keys(cfg, kw_p, kw_r, r1=r1)


def receiver_keys(cfg: SessionConfig, kw_p: Keyword, kw_r: Optional[Keyword] = None,
                  r1: Optional[BitString] = None) -> SessionKeys:
    """Derive the private keys from keywords and the library alone."""
    lib = cfg.library
    k_p = derive_private_key(lib, kw_p, cfg.s)
    if cfg.variant is Variant.VAR_E:
        kw_r, k_r = kw_p, k_p
    elif cfg.variant is Variant.BASIC_F:
        kw_r, k_r = None, None
    else:
        if kw_r is None:
            raise CipherError(f"variant {cfg.variant.name} needs a second keyword")
        k_r = derive_private_key(lib, kw_r, cfg.s)
    return SessionKeys(kw_p=kw_p, k_p=k_p, kw_r=kw_r, k_r=k_r, r1=r1, rule=cfg.rule)


def _fold(terms, kp=None, kr=None, r1=None, r2=None) -> int:
    vals = {"kp": kp, "kr": kr, "r1": r1, "r2": r2}
    acc = 0
    for t in terms:
        v = vals[t]
        if v is None:
            raise CipherError(f"key {t} missing for this variant")
        acc ^= v.value
    return acc


def _fit(cfg: SessionConfig, p: BitString) -> tuple[BitString, int]:
    if p.length > cfg.s:
        raise CipherError(f"message of {p.length} bits exceeds s={cfg.s}")
    if cfg.policy is Policy.ZERO_PAD:
        return p.concat(BitString.zeros(cfg.s - p.length)), cfg.s
    return p, p.length


def encrypt(cfg: SessionConfig, keys: SessionKeys, p: BitString) -> CipherOutput:
    p, n = _fit(cfg, p)
    if keys.r1 is None and has_random_key(cfg.variant):
        raise CipherError("sender keys need R1")
    k = keys.truncated(n)
    r2 = k.r2
    terms = cfg.terms
    c_p = BitString(p.value ^ _fold(terms.cp, k.k_p, k.k_r, k.r1, r2), n)
    if terms.cr is None:
        return CipherOutput(c_p)
    return CipherOutput(c_p, BitString(_fold(terms.cr, k.k_p, k.k_r, k.r1, r2), n))


def zero_padded(message_bits: int) -> Callable[[BitString], bool]:
    """Validity predicate: everything after ``message_bits`` is zero padding."""
    def check(p: BitString) -> bool:
        return p[message_bits:].value == 0
    return check


def decrypt(cfg: SessionConfig, keys: SessionKeys, out: CipherOutput,
            validity: Optional[Callable[[BitString], bool]] = None) -> Union[BitString, Ambiguous]:
    """Recover P from the ciphertexts and keyword-derived keys.

    Variant A yields R1 only up to complement; ``validity`` picks the
    plaintext candidate. Without a unique valid candidate both are returned
    as :class:`Ambiguous`.
    """
    c_p, c_r = out
    n = c_p.length
    expected = cfg.s if cfg.policy is Policy.ZERO_PAD else None
    if expected is not None and n != expected:
        raise CipherError(f"zero-pad ciphertext must have {expected} bits, got {n}")
    if n > cfg.s:
        raise CipherError(f"ciphertext of {n} bits exceeds s={cfg.s}")
    k = keys.truncated(n)
    terms = cfg.terms
    if terms.cr is None:
        return BitString(c_p.value ^ k.k_p.value, n)
    if c_r is None or c_r.length != n:
        raise CipherError("random key ciphertext missing or of wrong length")
    if cfg.variant is Variant.VAR_A:
        try:
            cands = recover_r1_from_sum_rule_a(c_r ^ k.k_r)
        except InconsistentSum as exc:
            raise CorruptCiphertext(str(exc)) from exc
        plains = [c_p ^ k.k_p ^ r1 for r1 in cands]
        if validity is not None:
            valid = [x for x in plains if validity(x)]
            if len(valid) == 1:
                return valid[0]
        return Ambiguous(*plains)
    r1 = c_r ^ k.k_r
    r2 = apply_rule(cfg.rule, r1, k.k_p)
    return BitString(c_p.value ^ _fold(terms.cp, k.k_p, k.k_r, r1, r2), n)


# -- streaming ---------------------------------------------------------------

class Direction(enum.Enum):
    ENCRYPT = "encrypt"
    DECRYPT = "decrypt"


def lookahead(cfg: SessionConfig) -> int:
    """How many R1 bits past position t are needed to produce plaintext bit t."""
    if "r2" not in cfg.terms.cp:
        return 0
    return 1 if cfg.rule is Rule.A else 2


class StreamOverflow(CipherError):
    pass


class EncryptStream:
    """Sender session. Each pushed plaintext bit yields its C_P/C_R bit pair at once."""

    def __init__(self, cfg: SessionConfig, keys: SessionKeys, length: int):
        if keys.r1 is None and has_random_key(cfg.variant):
            raise CipherError("sender keys need R1")
        self.cfg = cfg
        self.length = length
        k = keys.truncated(length)
        terms = cfg.terms
        r2 = k.r2
        self._mask = BitString(_fold(terms.cp, k.k_p, k.k_r, k.r1, r2), length)
        self._c_r = None
        if terms.cr is not None:
            self._c_r = BitString(_fold(terms.cr, k.k_p, k.k_r, k.r1, r2), length)
        self.position = 0

    def push(self, chunk: BitString) -> BitString:
        start, end = self.position, self.position + chunk.length
        if end > self.length:
            raise StreamOverflow(f"stream of {self.length} bits overflowed at {end}")
        c_p = chunk ^ self._mask[start:end]
        self.position = end
        if self._c_r is None:
            return c_p
        return interleave(c_p, self._c_r[start:end])

    def finish(self) -> BitString:
        """Pad a zero-pad stream to full length; a truncate stream must be complete."""
        rest = self.length - self.position
        if rest and self.cfg.policy is Policy.TRUNCATE:
            raise CipherError(f"truncated stream ended {rest} bits early")
        return self.push(BitString.zeros(rest))


class DecryptStream:
    """Receiver session fed the multiplexed payload (bare C_P for BASIC_F).

    Plaintext bit t is released once R1 is known up to position
    ``t + lookahead``; the last bits wrap onto R1[0], R1[1], which arrive first.
    """

    def __init__(self, cfg: SessionConfig, keys: SessionKeys, length: int):
        if cfg.variant is Variant.VAR_A:
            raise CipherError("variant A cannot be decrypted incrementally: R1 is only "
                              "known up to complement until the whole message is checked")
        self.cfg = cfg
        self.length = length
        self._keys = keys.truncated(length)
        self._two = cfg.terms.cr is not None
        self._lookahead = lookahead(cfg)
        self._pending = BitString(0, 0)
        self._c_p = 0
        self._c_r = 0
        self.received = 0  # complete C_P bits (pairs, for two-ciphertext variants)
        self.emitted = 0

    @property
    def consumed_payload_bits(self) -> int:
        return self.received * (2 if self._two else 1) + self._pending.length

    def push(self, chunk: BitString) -> BitString:
        width = 2 if self._two else 1
        buf = self._pending.concat(chunk)
        usable = buf.length - buf.length % width
        if self.received + usable // width > self.length:
            raise StreamOverflow(f"stream of {self.length} bits overflowed")
        body, self._pending = buf[:usable], buf[usable:]
        if self._two:
            c_p, c_r = deinterleave(body)
            self._c_r = (self._c_r << c_r.length) | c_r.value
        else:
            c_p = body
        self._c_p = (self._c_p << c_p.length) | c_p.value
        self.received += c_p.length
        return self._release()

    def _release(self) -> BitString:
        n, m = self.length, self.received
        ready = n if m == n else max(0, m - self._lookahead)
        start = self.emitted
        if ready <= start:
            return BitString(0, 0)
        k = self._keys
        c_p = BitString(self._c_p << (n - m), n)
        if self._two:
            r1_prefix = BitString(self._c_r, m) ^ k.k_r[:m]
            r1 = BitString(r1_prefix.value << (n - m), n)
            r2 = apply_rule(self.cfg.rule, r1, k.k_p)
            p = BitString(c_p.value ^ _fold(self.cfg.terms.cp, k.k_p, k.k_r, r1, r2), n)
        else:
            p = c_p ^ k.k_p
        self.emitted = ready
        return p[start:ready]

    def finish(self) -> BitString:
        if self._pending.length or self.received != self.length:
            raise CipherError(f"stream ended after {self.received} of {self.length} bits")
        return self._release()


def open_stream(cfg: SessionConfig, keys: SessionKeys, direction: Direction,
                length: Optional[int] = None):
    """Start an incremental session over ``length`` message bits (``cfg.s`` by default)."""
    if length is None:
        length = cfg.s
    if not 0 <= length <= cfg.s:
        raise CipherError(f"stream length {length} outside 0..{cfg.s}")
    if cfg.policy is Policy.ZERO_PAD and length != cfg.s:
        raise CipherError("zero-pad streams always run over s bits")
    if direction is Direction.ENCRYPT:
        return EncryptStream(cfg, keys, length)
    return DecryptStream(cfg, keys, length)
