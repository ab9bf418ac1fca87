"""Attacks on the cipher family, key-space arithmetic and a monobit test.

The known-plaintext attacks all reduce to a linear system over GF(2): each
known private-key bit at position ``p`` is the XOR of the basic keys' bits
at ``p`` weighted by the unknown selection vector. Rows are Python ints,
bit ``j`` standing for basic key ``j + 1``.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .bitstring import BitString
from .cipher import CipherOutput, Policy, SessionConfig, Variant, encrypt, new_session_keys
from .keys import GBounds, Keyword, Rule, rule_a
from .library import Library, LibraryConfig, Method, generate

# -- GF(2) linear systems ----------------------------------------------------


@dataclass(frozen=True)
class Gf2System:
    rows: tuple[int, ...]
    rhs: tuple[int, ...]
    k: int

    def __post_init__(self):
        if len(self.rows) != len(self.rhs):
            raise ValueError(f"{len(self.rows)} rows but {len(self.rhs)} right-hand sides")
        for row in self.rows:
            if row >> self.k:
                raise ValueError(f"row {row:#x} has bits beyond column {self.k - 1}")

    @classmethod
    def from_lists(cls, matrix: list[list[int]], rhs: list[int]) -> Gf2System:
        k = len(matrix[0]) if matrix else 0
        rows = tuple(sum(bit << j for j, bit in enumerate(r)) for r in matrix)
        return cls(rows, tuple(rhs), k)


class Status(enum.Enum):
    UNIQUE = "unique"
    UNDERDETERMINED = "underdetermined"
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class Gf2Solution:
    status: Status
    rank: int
    k: int
    particular: Optional[int] = None
    nullspace: tuple[int, ...] = ()

    def solutions(self, limit: int = 1 << 16) -> list[int]:
        """Every solution vector, in Gray-code order from the particular one."""
        if self.status is Status.INCONSISTENT:
            return []
        if 1 << len(self.nullspace) > limit:
            raise ValueError(f"2^{len(self.nullspace)} solutions exceed limit {limit}")
        out = [self.particular]
        x = self.particular
        for i in range(1, 1 << len(self.nullspace)):
            x ^= self.nullspace[(i & -i).bit_length() - 1]
            out.append(x)
        return out


def _echelon(rows: Iterable[int], rhs: Iterable[int], skip_inconsistent: bool = False):
    pivots: dict[int, list[int]] = {}
    consistent = True
    for row, b in zip(rows, rhs):
        while row:
            lead = row.bit_length() - 1
            p = pivots.get(lead)
            if p is None:
                pivots[lead] = [row, b]
                break
            row ^= p[0]
            b ^= p[1]
        else:
            if b and not skip_inconsistent:
                consistent = False
    return pivots, consistent


def gf2_solve(system: Gf2System, skip_inconsistent: bool = False) -> Gf2Solution:
    """Gauss-Jordan elimination over GF(2).

    With ``skip_inconsistent`` rows that contradict earlier ones are dropped,
    which yields the solution of a maximal consistent prefix-greedy subsystem.
    """
    pivots, consistent = _echelon(system.rows, system.rhs, skip_inconsistent)
    rank = len(pivots)
    if not consistent:
        return Gf2Solution(Status.INCONSISTENT, rank, system.k)
    leads = sorted(pivots)
    for i, lead in enumerate(leads):
        row, b = pivots[lead]
        for other in leads[i + 1:]:
            entry = pivots[other]
            if entry[0] >> lead & 1:
                entry[0] ^= row
                entry[1] ^= b
    particular = 0
    for lead, (_, b) in pivots.items():
        if b:
            particular |= 1 << lead
    nullspace = []
    for f in range(system.k):
        if f in pivots:
            continue
        v = 1 << f
        for lead, (row, _) in pivots.items():
            if row >> f & 1:
                v |= 1 << lead
        nullspace.append(v)
    status = Status.UNIQUE if not nullspace else Status.UNDERDETERMINED
    return Gf2Solution(status, rank, system.k, particular, tuple(nullspace))


# -- attacker's view ---------------------------------------------------------


@dataclass(frozen=True)
class AttackInput:
    """Ciphertexts plus known plaintext bits, positions 0-indexed."""

    library: Library
    c_p: BitString
    known: Mapping[int, int]
    variant: Variant = Variant.BASIC_F
    rule: Rule = Rule.A
    c_r: Optional[BitString] = None

    def __post_init__(self):
        n = self.c_p.length
        for pos, bit in self.known.items():
            if not 0 <= pos < n:
                raise ValueError(f"known position {pos} outside message of {n} bits")
            if bit not in (0, 1):
                raise ValueError(f"known bit at {pos} is {bit!r}")

    @property
    def n(self) -> int:
        return self.c_p.length


class Outcome(enum.Enum):
    RECOVERED = "recovered"
    AMBIGUOUS = "ambiguous"
    UNDERDETERMINED = "underdetermined"
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class AttackResult:
    outcome: Outcome
    rank: int
    k: int
    keyword: Optional[Keyword] = None
    keyword_r: Optional[Keyword] = None
    plaintext: Optional[BitString] = None
    candidates: int = 0
    reason: str = ""

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.RECOVERED

    def match_fraction(self, truth: BitString, known: Mapping[int, int]) -> float:
        """Share of the unknown positions where the attacker's plaintext is right."""
        unknown = [i for i in range(truth.length) if i not in known]
        if not unknown:
            return 1.0
        if self.plaintext is None:
            return 0.0
        diff = self.plaintext ^ truth
        return sum(1 for i in unknown if not diff[i]) / len(unknown)


def position_row(lib: Library, p: int) -> int:
    """Bits of every basic key at position ``p`` packed into one int."""
    if lib.method is Method.INDEPENDENT_KEYS:
        shift = lib.s - 1 - p
        row = 0
        for j, key in enumerate(lib.keys):
            row |= ((key.value >> shift) & 1) << j
        return row
    master = lib.master
    l = master.length
    row = 0
    for j in range(l):
        row |= master[(j + p) % l] << j
    return row


def _keyword_from_vector(lib: Library, x: int) -> Keyword:
    ids = tuple(j + 1 for j in range(lib.num_basic_keys) if x >> j & 1)
    return Keyword(lib.method, ids)


def _key_from_vector(lib: Library, x: int, s: int) -> BitString:
    """XOR of the selected basic keys, cut to the first ``s`` bits."""
    width = lib.s if lib.method is Method.INDEPENDENT_KEYS else s
    acc = 0
    j = 0
    while x:
        if x & 1:
            acc ^= lib.basic_key(j + 1, width).value
        x >>= 1
        j += 1
    return BitString(acc >> (width - s), s)


def _key_stream(lib: Library, s: int):
    return lambda x: _key_from_vector(lib, x, s)


def _solve_and_decrypt(inp: AttackInput, rows, rhs, to_plain, max_candidates, check,
                       nvars: Optional[int] = None):
    """Shared tail: solve for the selection vector, rebuild and verify the plaintext.

    Variables ``0..k-1`` select basic keys of the first unknown private key;
    with ``nvars == 2k`` the upper half selects those of a second one.
    """
    lib = inp.library
    k = lib.num_basic_keys
    nvars = nvars or k
    system = Gf2System(tuple(rows), tuple(rhs), nvars)
    sol = gf2_solve(system)
    if sol.status is Status.INCONSISTENT:
        guess = gf2_solve(system, skip_inconsistent=True)
        return AttackResult(Outcome.INCONSISTENT, sol.rank, nvars,
                            plaintext=to_plain(guess.particular),
                            reason="known bits contradict the assumed variant")
    nullity = len(sol.nullspace)
    if nullity > 16 or 1 << nullity > max_candidates:
        return AttackResult(Outcome.UNDERDETERMINED, sol.rank, nvars,
                            plaintext=to_plain(sol.particular), candidates=1 << nullity,
                            reason=f"rank {sol.rank} < {nvars}; 2^{nullity} candidates")
    plains = {}
    for x in sol.solutions(max_candidates):
        p = to_plain(x)
        if check(p):
            plains.setdefault(p, x)
    if not plains:
        return AttackResult(Outcome.INCONSISTENT, sol.rank, nvars,
                            reason="no candidate reproduces the known bits")
    (first, x0), *_ = plains.items()
    outcome = Outcome.RECOVERED if len(plains) == 1 else Outcome.AMBIGUOUS
    low = x0 & ((1 << k) - 1)
    high = x0 >> k if nvars > k else None
    return AttackResult(outcome, sol.rank, nvars, keyword=_keyword_from_vector(lib, low),
                        keyword_r=None if high is None else _keyword_from_vector(lib, high),
                        plaintext=first, candidates=len(plains))


def _reproduces(known: Mapping[int, int]):
    return lambda p: all(p[i] == b for i, b in known.items())


def known_plaintext_attack_basic(inp: AttackInput, max_candidates: int = 1 << 16) -> AttackResult:
    """Treat C_P as P ^ K_P and solve for the selection behind K_P.

    Run against any other variant, the system is usually inconsistent; the
    result then carries the best guess of a maximal consistent subsystem.
    """
    lib, n = inp.library, inp.n
    positions = sorted(inp.known)
    rows = [position_row(lib, p) for p in positions]
    rhs = [inp.known[p] ^ inp.c_p[p] for p in positions]
    key_of = _key_stream(lib, n)
    return _solve_and_decrypt(inp, rows, rhs, lambda x: inp.c_p ^ key_of(x),
                              max_candidates, _reproduces(inp.known))


class Infeasible(ValueError):
    pass


def brute_force_attack(inp: AttackInput, max_keywords: int = 1 << 20) -> frozenset[int]:
    """Every method 1 selection vector whose K_P matches all known bits of P ^ C_P."""
    lib = inp.library
    if lib.method is not Method.INDEPENDENT_KEYS:
        raise ValueError("brute force is implemented for method 1 libraries")
    k = lib.config.k
    total = 1 << k
    if total > max_keywords:
        raise Infeasible(f"exhaustive search over 2^{k} = {total} keywords exceeds bound {max_keywords}")
    positions = sorted(inp.known)
    n = inp.n
    # column j: bits of basic key j at the known positions
    cols = []
    for key in lib.keys:
        v = key.value >> (lib.s - n) if lib.s > n else key.value
        col = 0
        for i, p in enumerate(positions):
            col |= ((v >> (n - 1 - p)) & 1) << i
        cols.append(col)
    target = 0
    for i, p in enumerate(positions):
        target |= (inp.known[p] ^ inp.c_p[p]) << i
    found = [0] if target == 0 else []
    acc = mask = 0
    for i in range(1, total):
        j = (i & -i).bit_length() - 1
        acc ^= cols[j]
        mask ^= 1 << j
        if acc == target:
            found.append(mask)
    return frozenset(found)


def attack_random_key_variation(inp: AttackInput, max_candidates: int = 1 << 16) -> AttackResult:
    """Known-plaintext attack on variants B, C and E under rule A.

    Known P bits expose bits of R2 (C and E) or of R1 ^ R2 (B). Rule A makes
    R1[p+1] = R2[p], which turns them into bits of the private key in C_R,
    then into a GF(2) system. Rule B hides the offsets behind K_P and the
    attack stops there.
    """
    lib, n = inp.library, inp.n
    k = lib.num_basic_keys
    if inp.variant not in (Variant.VAR_B, Variant.VAR_C, Variant.VAR_E):
        raise ValueError(f"attack applies to variants B, C, E, not {inp.variant.name}")
    if inp.c_r is None:
        raise ValueError("attack needs the random key ciphertext")
    if inp.rule is not Rule.A:
        return AttackResult(Outcome.UNDERDETERMINED, 0, k,
                            reason="rule B: R1 positions depend on the unknown K_P")
    c_p, c_r = inp.c_p, inp.c_r
    rows, rhs = [], []
    for p in sorted(inp.known):
        q = (p + 1) % n
        if inp.variant is Variant.VAR_B:
            # R1[p] ^ R1[q] = d[p]  ->  K_R[p] ^ K_R[q] = C_R[p] ^ C_R[q] ^ d[p]
            d = inp.known[p] ^ c_p[p]
            rows.append(position_row(lib, p) ^ position_row(lib, q))
            rhs.append(c_r[p] ^ c_r[q] ^ d)
            continue
        r2 = inp.known[p] ^ c_p[p]
        if inp.variant is Variant.VAR_E:
            r2 ^= c_r[p]
        rows.append(position_row(lib, q))
        rhs.append(c_r[q] ^ r2)  # key bit at q = C_R[q] ^ R1[q], R1[q] = R2[p]
    if not rows:
        return AttackResult(Outcome.UNDERDETERMINED, 0, k, reason="no known plaintext bits")
    key_of = _key_stream(lib, n)

    def to_plain(x: int) -> BitString:
        key = key_of(x)
        r1 = c_r ^ key
        r2 = rule_a(r1)
        if inp.variant is Variant.VAR_E:
            return c_p ^ key ^ r1 ^ r2
        if inp.variant is Variant.VAR_C:
            return c_p ^ r2
        return c_p ^ r1 ^ r2

    return _solve_and_decrypt(inp, rows, rhs, to_plain, max_candidates, _reproduces(inp.known))


def attack_variation_e_rule_a(inp: AttackInput, max_candidates: int = 1 << 16) -> AttackResult:
    if inp.variant is not Variant.VAR_E:
        raise ValueError(f"expected variant E input, got {inp.variant.name}")
    return attack_random_key_variation(inp, max_candidates)


def attack_variation_d_rule_a(inp: AttackInput, max_candidates: int = 1 << 16) -> AttackResult:
    """Variant D with rule A: rotating C_R by one cancels both random keys.

    ``C_P ^ rotl1(C_R) = P ^ K_P ^ rotl1(K_R)``, so known plaintext bits give
    linear equations in both selections at once (``2k`` unknowns). Under
    rule B the cancellation does not happen and the system comes out
    inconsistent.
    """
    lib, n = inp.library, inp.n
    k = lib.num_basic_keys
    if inp.variant is not Variant.VAR_D:
        raise ValueError(f"expected variant D input, got {inp.variant.name}")
    if inp.c_r is None:
        raise ValueError("attack needs the random key ciphertext")
    c_p, c_r = inp.c_p, inp.c_r
    mixed = c_p ^ c_r.rotl(1)
    rows, rhs = [], []
    for p in sorted(inp.known):
        rows.append(position_row(lib, p) | position_row(lib, (p + 1) % n) << k)
        rhs.append(inp.known[p] ^ mixed[p])
    if not rows:
        return AttackResult(Outcome.UNDERDETERMINED, 0, 2 * k, reason="no known plaintext bits")
    key_of = _key_stream(lib, n)
    low = (1 << k) - 1

    def to_plain(x: int) -> BitString:
        k_p, k_r = key_of(x & low), key_of(x >> k)
        r1 = c_r ^ k_r
        return c_p ^ k_p ^ rule_a(r1)

    return _solve_and_decrypt(inp, rows, rhs, to_plain, max_candidates,
                              _reproduces(inp.known), nvars=2 * k)


# -- key-space arithmetic ----------------------------------------------------


def log2_exact(n: int) -> float:
    """log2 of a big integer without overflowing a float."""
    if n <= 0:
        raise ValueError("log2 of non-positive number")
    b = n.bit_length()
    if b <= 53:
        return math.log2(n)
    return (b - 53) + math.log2(n >> (b - 53))


@dataclass(frozen=True)
class KeySpaceReport:
    method: Method
    size_param: int
    bounds: Optional[GBounds]
    keys_in_use: int
    size: int

    @property
    def log2(self) -> float:
        return round(log2_exact(self.size), 4)

    def ratio_to_power_of_two(self, exponent: int) -> float:
        return self.size / (1 << exponent)


def key_space_size(method: Method, size_param: int, bounds: Optional[GBounds] = None,
                   keys_in_use: int = 1) -> KeySpaceReport:
    """Number of distinct private keys (or key pairs) an exhaustive search must try.

    Method 1 without bounds counts every subset of the ``k`` basic keys;
    with bounds it sums ``comb(k, g)``. Method 2 counts ordered pointer
    tuples, ``l ** g`` summed over the admissible ``g``.
    """
    if keys_in_use not in (1, 2):
        raise ValueError("keys_in_use must be 1 or 2")
    if method is Method.INDEPENDENT_KEYS:
        if bounds is None:
            single = 1 << size_param
        else:
            if bounds.g_max > size_param:
                raise ValueError(f"g_max={bounds.g_max} exceeds k={size_param}")
            single = sum(math.comb(size_param, g) for g in range(bounds.g_min, bounds.g_max + 1))
    else:
        if bounds is None:
            raise ValueError("method 2 key space needs g bounds")
        single = sum(size_param ** g for g in range(bounds.g_min, bounds.g_max + 1))
    return KeySpaceReport(method, size_param, bounds, keys_in_use, single ** keys_in_use)


# -- statistics --------------------------------------------------------------

MONOBIT_CRITICAL = 2.576


@dataclass(frozen=True)
class MonobitResult:
    n: int
    ones: int
    z: float

    @property
    def passed(self) -> bool:
        return abs(self.z) < MONOBIT_CRITICAL


def monobit_test(data: BitString) -> MonobitResult:
    n = data.length
    if n < 1024:
        raise ValueError(f"monobit test needs at least 1024 bits, got {n}")
    ones = data.popcount()
    return MonobitResult(n, ones, (2 * ones - n) / math.sqrt(n))


# -- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class TrialReport:
    trial: int
    rank: int
    success: bool
    match: float

    def to_line(self) -> str:
        return f"{self.trial}\t{self.rank}\t{int(self.success)}\t{self.match:.4f}"

    @classmethod
    def from_line(cls, line: str) -> TrialReport:
        trial, rank, success, match = line.split("\t")
        return cls(int(trial), int(rank), success == "1", float(match))


@dataclass
class Scenario:
    """A fresh library, session and message with ``r`` known plaintext bits."""

    cfg: SessionConfig
    plaintext: BitString
    out: CipherOutput
    known: dict = field(default_factory=dict)

    def attack_input(self) -> AttackInput:
        return AttackInput(self.cfg.library, self.out.c_p, self.known,
                           self.cfg.variant, self.cfg.rule, self.out.c_r)


def make_scenario(rng: random.Random, variant: Variant, rule: Rule = Rule.A, k: int = 32,
                  s: int = 256, known_bits: int = 64, run: bool = False,
                  library: Optional[Library] = None) -> Scenario:
    """Random instance for Monte-Carlo trials.

    ``run`` places the known bits as one consecutive block at a random
    offset instead of scattering them.
    """
    lib = library or generate(LibraryConfig(Method.INDEPENDENT_KEYS, s=s, k=k), rng)
    cfg = SessionConfig(variant, rule, lib, bounds=GBounds(1, lib.num_basic_keys),
                        policy=Policy.ZERO_PAD)
    keys = new_session_keys(cfg, rng)
    p = BitString.random(cfg.s, rng)
    out = encrypt(cfg, keys, p)
    if run:
        start = rng.randrange(cfg.s - known_bits + 1)
        positions = range(start, start + known_bits)
    else:
        positions = rng.sample(range(cfg.s), known_bits)
    return Scenario(cfg, p, out, {i: p[i] for i in positions})
