import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtpad import library
from mtpad.bitstring import BitString
from mtpad.keys import (
    GBounds,
    InconsistentSum,
    Keyword,
    KeyMaterialError,
    Rule,
    apply_rule,
    decode_keyword,
    derive_private_key,
    encode_keyword,
    generate_r1,
    pointer_width,
    recover_r1_from_sum_rule_a,
    rule_a,
    rule_b,
    sample_keyword,
)
from mtpad.library import Library, LibraryConfig, Method

B = BitString.from_bits
M1, M2 = Method.INDEPENDENT_KEYS, Method.MASTER_STRING


def lib1(k=8, s=16, seed=0):
    return library.generate(LibraryConfig(M1, s=s, k=k), random.Random(seed))


def lib2(l=16, s=8, seed=0):
    return library.generate(LibraryConfig(M2, s=s, l=l), random.Random(seed))


def test_encode_method1_example():
    lib = lib1(k=8)
    assert encode_keyword(Keyword(M1, (3, 1)), lib) == B("10100000")
    assert decode_keyword(B("10100000"), lib) == Keyword(M1, (1, 3))


def test_encode_method2_example():
    lib = lib2(l=16)
    assert encode_keyword(Keyword(M2, (1, 16)), lib) == B("0000 1111")
    assert decode_keyword(B("00001111"), lib, g=2) == Keyword(M2, (1, 16))


def test_method1_k256_keyword_is_32_bytes():
    lib = lib1(k=256, s=8)
    w = encode_keyword(sample_keyword(lib, GBounds.full(lib), random.Random(1)), lib)
    assert len(w.to_bytes()) == 32


def test_decode_rejects_wrong_lengths():
    with pytest.raises(KeyMaterialError):
        decode_keyword(B("1010"), lib1(k=8))
    with pytest.raises(KeyMaterialError):
        decode_keyword(B("0000111"), lib2(l=16), g=2)
    with pytest.raises(KeyMaterialError):
        decode_keyword(B("00001111"), lib2(l=16))


def test_pointer_width_needs_power_of_two():
    assert pointer_width(2 ** 32) == 32
    with pytest.raises(KeyMaterialError):
        pointer_width(24)


def test_keyword_validation():
    with pytest.raises(KeyMaterialError):
        Keyword(M1, (1, 1))
    with pytest.raises(KeyMaterialError):
        Keyword(M1, (9,)).validate(lib1(k=8))
    with pytest.raises(KeyMaterialError):
        Keyword(M2, (1,)).validate(lib1(k=8))
    with pytest.raises(KeyMaterialError):
        Keyword(M1, (1, 2, 3)).validate(lib1(k=8), GBounds(1, 2))
    # method 2 pointers may repeat and keep their order
    assert Keyword(M2, (5, 2, 5)).selection == (5, 2, 5)


def test_bounds_validation():
    with pytest.raises(KeyMaterialError):
        GBounds(3, 2)
    with pytest.raises(KeyMaterialError):
        GBounds(0, 2)
    with pytest.raises(KeyMaterialError):
        GBounds(1, 9).check(lib1(k=8))


def test_bounds_k_k_always_select_everything():
    lib = lib1(k=8)
    rng = random.Random(2)
    for _ in range(20):
        assert sample_keyword(lib, GBounds(8, 8), rng).selection == tuple(range(1, 9))


def test_method1_sampling_is_uniform_over_subsets():
    lib = lib1(k=5)
    rng = random.Random(3)
    counts = Counter(sample_keyword(lib, GBounds(1, 5), rng).selection for _ in range(31000))
    assert len(counts) == 31
    # 1000 expected per subset, sd about 31
    assert all(abs(c - 1000) < 160 for c in counts.values())


def test_method2_sampling_respects_bounds():
    lib = lib2(l=16)
    rng = random.Random(4)
    seen = Counter()
    for _ in range(2000):
        kw = sample_keyword(lib, GBounds(2, 3), rng)
        assert 2 <= kw.g <= 3
        kw.validate(lib)
        seen.update(kw.selection)
    assert set(seen) == set(range(1, 17))


@given(st.integers(0, 2**12 - 1).filter(bool))
def test_method1_encode_round_trip(mask):
    lib = lib1(k=12, s=4)
    kw = Keyword(M1, tuple(j + 1 for j in range(12) if mask >> j & 1))
    assert decode_keyword(encode_keyword(kw, lib), lib) == kw


@given(st.lists(st.integers(1, 64), min_size=1, max_size=6))
def test_method2_encode_round_trip(pointers):
    lib = lib2(l=64)
    kw = Keyword(M2, tuple(pointers))
    assert decode_keyword(encode_keyword(kw, lib), lib, kw.g) == kw


def test_private_key_examples():
    lib = Library(LibraryConfig(M1, s=2, k=2), keys=(B("01"), B("10")))
    assert derive_private_key(lib, Keyword(M1, (1, 2))) == B("11")
    assert derive_private_key(lib, Keyword(M1, (2,))) == B("10")


def test_private_key_against_xor_oracle():
    rng = random.Random(5)
    lib = lib2(l=32, s=32)
    for _ in range(100):
        ptrs = tuple(rng.randint(1, 32) for _ in range(rng.randint(1, 4)))
        s = rng.randint(1, 32)
        want = [0] * s
        for q in ptrs:
            for i in range(s):
                want[i] ^= lib.master[(q - 1 + i) % 32]
        assert list(derive_private_key(lib, Keyword(M2, ptrs), s)) == want


def test_r1_is_never_constant_and_reproducible():
    for seed in range(50):
        r1 = generate_r1(2, random.Random(seed))
        assert not r1.is_constant()
    assert generate_r1(64, random.Random(1)) == generate_r1(64, random.Random(1))
    with pytest.raises(KeyMaterialError):
        generate_r1(0, random.Random(1))


def test_rule_a_examples():
    assert rule_a(B("1000")) == B("0001")
    assert rule_a(B("1111")) == B("1111")
    assert rule_a(B("1111")) ^ B("1111") == B("0000")


def test_rule_b_examples():
    assert rule_b(B("1000"), B("1111")) == B("0010")
    assert rule_b(B("0110"), B("1010")) == B("1100")
    with pytest.raises(KeyMaterialError):
        rule_b(B("011"), B("1010"))
    with pytest.raises(KeyMaterialError):
        apply_rule(Rule.B, B("0110"))


def test_rule_b_against_index_oracle():
    rng = random.Random(6)
    for _ in range(200):
        s = rng.randint(1, 70)
        r1 = BitString.random(s, rng)
        kp = BitString.random(s, rng)
        want = [r1[(i + 1 + kp[i]) % s] for i in range(s)]
        assert list(rule_b(r1, kp)) == want
        assert rule_b(r1, BitString.zeros(s)) == rule_a(r1)


def test_rules_permute_bits_of_long_strings():
    rng = random.Random(7)
    for _ in range(50):
        r1 = BitString.random(64, rng)
        assert rule_a(r1).popcount() == r1.popcount()
    # rule B keeps the popcount only when the offsets form a permutation;
    # the all-ones and all-zeros K_P are two such cases
    r1 = BitString.random(64, rng)
    assert rule_b(r1, BitString.ones(64)).popcount() == r1.popcount()


def test_sum_recovery_examples():
    assert set(recover_r1_from_sum_rule_a(B("0000"))) == {B("0000"), B("1111")}
    assert recover_r1_from_sum_rule_a(B("1010")) == (B("0110"), B("1001"))
    with pytest.raises(InconsistentSum):
        recover_r1_from_sum_rule_a(B("1000"))
    with pytest.raises(InconsistentSum):
        recover_r1_from_sum_rule_a(B(""))


def test_sum_recovery_against_sequential_oracle():
    rng = random.Random(8)
    for _ in range(300):
        n = rng.randint(1, 300)
        d = BitString.random(n, rng)
        if d.parity():
            continue
        x = [0]
        for i in range(n - 1):
            x.append(x[-1] ^ d[i])
        first, second = recover_r1_from_sum_rule_a(d)
        assert list(first) == x
        assert second == ~first
        assert first ^ rule_a(first) == d


def test_rule_b_is_not_a_permutation_in_general():
    # offsets 2 then 1 both land on R1[2]; R1[1] is never read
    r1 = B("0010")
    r2 = rule_b(r1, B("1000"))
    assert r2 == B("1100")
    assert r2.popcount() != r1.popcount()
