"""Keywords, private keys, the first random key and the two R2 rules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .bitstring import BitString
from .entropy import RandomBitSource, randbelow
from .library import Library, LibraryError, Method


class KeyMaterialError(ValueError):
    """Invalid keyword, bounds or key material."""


class InconsistentSum(ValueError):
    """An odd-parity string cannot be R1 xor rotl1(R1)."""


class Rule(enum.IntEnum):
    A = 1  # plain rotation by one
    B = 2  # rotation by one or two, chosen per bit by K_P


@dataclass(frozen=True)
class GBounds:
    g_min: int
    g_max: int

    def __post_init__(self):
        if not 1 <= self.g_min <= self.g_max:
            raise KeyMaterialError(f"need 1 <= g_min <= g_max, got [{self.g_min}, {self.g_max}]")

    def check(self, lib: Library) -> None:
        if lib.method is Method.INDEPENDENT_KEYS and self.g_max > lib.config.k:
            raise KeyMaterialError(f"g_max={self.g_max} exceeds k={lib.config.k}")

    @classmethod
    def full(cls, lib: Library) -> GBounds:
        if lib.method is Method.INDEPENDENT_KEYS:
            return cls(1, lib.config.k)
        return cls(1, 4)


@dataclass(frozen=True)
class Keyword:
    """A basic-key selection: sorted serials (method 1) or ordered pointers (method 2)."""

    method: Method
    selection: tuple[int, ...]

    def __post_init__(self):
        if self.method is Method.INDEPENDENT_KEYS:
            sel = tuple(sorted(self.selection))
            if len(set(sel)) != len(sel):
                raise KeyMaterialError("method 1 serial numbers must be distinct")
            object.__setattr__(self, "selection", sel)
        else:
            object.__setattr__(self, "selection", tuple(self.selection))

    @property
    def g(self) -> int:
        return len(self.selection)

    def validate(self, lib: Library, bounds: GBounds | None = None) -> None:
        if self.method is not lib.method:
            raise KeyMaterialError(f"method {self.method.value} keyword for a method {lib.method.value} library")
        n = lib.num_basic_keys
        for ident in self.selection:
            if not 1 <= ident <= n:
                raise KeyMaterialError(f"basic key id {ident} outside 1..{n}")
        if bounds is not None and not bounds.g_min <= self.g <= bounds.g_max:
            raise KeyMaterialError(f"g={self.g} outside [{bounds.g_min}, {bounds.g_max}]")


def sample_keyword(lib: Library, bounds: GBounds, entropy: RandomBitSource) -> Keyword:
    """Draw a keyword uniformly over every selection the bounds allow.

    For method 1 the subset size is drawn with weight ``comb(k, g)`` so that
    each admissible subset is equally likely; a plain uniform ``g`` would
    favour small and large subsets.
    """
    bounds.check(lib)
    if lib.method is Method.INDEPENDENT_KEYS:
        k = lib.config.k
        weights = [math.comb(k, g) for g in range(bounds.g_min, bounds.g_max + 1)]
        u = randbelow(entropy, sum(weights))
        g = bounds.g_min
        for w in weights:
            if u < w:
                break
            u -= w
            g += 1
        pool = list(range(1, k + 1))
        for i in range(g):
            j = i + randbelow(entropy, k - i)
            pool[i], pool[j] = pool[j], pool[i]
        return Keyword(Method.INDEPENDENT_KEYS, tuple(pool[:g]))
    l = lib.config.l
    g = bounds.g_min + randbelow(entropy, bounds.g_max - bounds.g_min + 1)
    return Keyword(Method.MASTER_STRING, tuple(1 + randbelow(entropy, l) for _ in range(g)))


def pointer_width(l: int) -> int:
    if l < 2 or l & (l - 1):
        raise KeyMaterialError(f"pointer encoding needs l to be a power of two >= 2, got {l}")
    return l.bit_length() - 1


def encode_keyword(kw: Keyword, lib: Library) -> BitString:
    kw.validate(lib)
    if lib.method is Method.INDEPENDENT_KEYS:
        k = lib.config.k
        value = 0
        for serial in kw.selection:
            value |= 1 << (k - serial)
        return BitString(value, k)
    a = pointer_width(lib.config.l)
    value = 0
    for q in kw.selection:
        value = (value << a) | (q - 1)
    return BitString(value, a * kw.g)


def decode_keyword(w: BitString, lib: Library, g: int | None = None) -> Keyword:
    """Inverse of :func:`encode_keyword`; method 2 needs the pointer count ``g``."""
    if lib.method is Method.INDEPENDENT_KEYS:
        k = lib.config.k
        if w.length != k:
            raise KeyMaterialError(f"method 1 keyword must have {k} bits, got {w.length}")
        return Keyword(Method.INDEPENDENT_KEYS,
                       tuple(i + 1 for i in range(k) if w[i]))
    if g is None:
        raise KeyMaterialError("decoding a method 2 keyword needs g")
    a = pointer_width(lib.config.l)
    if w.length != g * a:
        raise KeyMaterialError(f"method 2 keyword with g={g} must have {g * a} bits, got {w.length}")
    return Keyword(Method.MASTER_STRING,
                   tuple(w[i * a:(i + 1) * a].value + 1 for i in range(g)))


def derive_private_key(lib: Library, kw: Keyword, s: int | None = None) -> BitString:
    """XOR of the selected basic keys."""
    if s is None:
        s = lib.s
    kw.validate(lib)
    acc = 0
    try:
        for ident in kw.selection:
            acc ^= lib.basic_key(ident, s).value
    except LibraryError as exc:
        raise KeyMaterialError(str(exc)) from exc
    return BitString(acc, s)


def generate_r1(s: int, entropy: RandomBitSource) -> BitString:
    """Fresh random key; all-zero and all-one draws are rejected and redrawn."""
    if s < 1:
        raise KeyMaterialError(f"random key length must be >= 1, got {s}")
    if s == 1:
        # every 1-bit string is constant
        return BitString.random(1, entropy)
    while True:
        r1 = BitString.random(s, entropy)
        if not r1.is_constant():
            return r1


def rule_a(r1: BitString) -> BitString:
    return r1.rotl(1)


def rule_b(r1: BitString, kp: BitString) -> BitString:
    """``R2[i] = R1[(i + 1 + K_P[i]) mod s]``."""
    if r1.length != kp.length:
        raise KeyMaterialError(f"rule B needs equal lengths, got {r1.length} and {kp.length}")
    one = r1.rotl(1).value
    two = r1.rotl(2).value
    sel = kp.value
    return BitString((one & ~sel) | (two & sel), r1.length)


def apply_rule(rule: Rule, r1: BitString, kp: BitString | None = None) -> BitString:
    if rule is Rule.A:
        return rule_a(r1)
    if kp is None:
        raise KeyMaterialError("rule B needs K_P")
    return rule_b(r1, kp)


def recover_r1_from_sum_rule_a(d: BitString) -> tuple[BitString, BitString]:
    """Both solutions ``x`` of ``x ^ rotl1(x) == d``: first bit 0, then its complement.

    Raises :class:`InconsistentSum` when ``d`` has odd parity.
    """
    n = d.length
    if n == 0:
        raise InconsistentSum("empty sum")
    if d.parity():
        raise InconsistentSum("sum has odd parity; not of the form R1 ^ rotl1(R1)")
    # x[i+1] = x[i] ^ d[i] with x[0] = 0, i.e. x[j] is the prefix XOR of d[0..j-1].
    # Prefix XOR over the int: shift-and-xor doubling, bit 0 of the string is the MSB.
    v = d.value >> 1
    shift = 1
    while shift < n:
        v ^= v >> shift
        shift <<= 1
    x = BitString(v, n)
    return x, ~x
