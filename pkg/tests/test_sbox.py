import random

import numpy as np
import pytest

from oracles import naive_ddt, naive_diff, naive_lat, naive_lin, naive_lut_words, naive_optimal, naive_single_bit_diffusion
from sucsim import sbox as sb
from sucsim.errors import FilterExhausted, InvalidSBox, NotBijective, WrongLength
from sucsim.sbox import IDENTITY, PRESENT, SBox4
from sucsim.trng import Trng

SHIFT = SBox4(tuple((x + 1) % 16 for x in range(16)))
UNSHIFT = SBox4(tuple((x - 1) % 16 for x in range(16)))
SWAP01 = SBox4((1, 0) + tuple(range(2, 16)))
ZERO = SBox4((0,) * 16)


def random_perm(r):
    t = list(range(16))
    r.shuffle(t)
    return SBox4(tuple(t))


def test_malformed_entries():
    with pytest.raises(InvalidSBox):
        SBox4((16,) + (0,) * 15)
    with pytest.raises(InvalidSBox):
        SBox4((0,) * 15)
    with pytest.raises(InvalidSBox):
        sb.diff_table([1.5] * 16)
    with pytest.raises(InvalidSBox):
        sb.is_optimal([-1] * 16)


def test_identity_tables():
    d = sb.diff_table(IDENTITY)
    assert (d == 16 * np.eye(16, dtype=int)).all()
    assert sb.differential_uniformity(IDENTITY) == 16
    assert sb.linearity(IDENTITY) == 16


def test_constant_sbox_tables():
    d = sb.diff_table(ZERO)
    assert (d[:, 0] == 16).all()
    assert sb.linearity(ZERO) == naive_lin(ZERO.table) == 16
    assert (sb.lin_table(ZERO) == np.array(naive_lat(ZERO.table))).all()


def test_present_against_oracles():
    assert (sb.diff_table(PRESENT) == np.array(naive_ddt(PRESENT.table))).all()
    assert (sb.lin_table(PRESENT) == np.array(naive_lat(PRESENT.table))).all()
    assert sb.differential_uniformity(PRESENT) == naive_diff(PRESENT.table) == 4
    assert sb.linearity(PRESENT) == naive_lin(PRESENT.table) == 8
    assert sb.nonlinearity(PRESENT) == 4
    assert sb.is_optimal(PRESENT)
    assert sb.has_single_bit_diffusion(PRESENT)


def test_tables_match_oracles_on_random_sboxes():
    r = random.Random(1)
    for _ in range(30):
        s = random_perm(r)
        assert (sb.diff_table(s) == np.array(naive_ddt(s.table))).all()
        assert (sb.lin_table(s) == np.array(naive_lat(s.table))).all()
        assert sb.is_optimal(s) == naive_optimal(s.table)
        assert sb.has_single_bit_diffusion(s) == naive_single_bit_diffusion(s.table)


def test_table_invariants():
    r = random.Random(2)
    for _ in range(10):
        s = SBox4(tuple(r.randrange(16) for _ in range(16)))
        d = sb.diff_table(s)
        assert (d.sum(axis=1) == 16).all()
        assert d[0, 0] == 16 and (d[0, 1:] == 0).all()
        lt = sb.lin_table(s)
        assert lt[0, 0] == 16 and (lt % 2 == 0).all() and lt.max() <= 16


def test_optimal_predicates():
    assert not sb.is_optimal(IDENTITY)
    assert not sb.is_optimal(ZERO)
    assert sb.is_involution(IDENTITY)
    assert not sb.is_involution(SHIFT)
    assert sb.is_involution(SWAP01)


def test_single_bit_diffusion():
    assert not sb.has_single_bit_diffusion(IDENTITY)
    assert not sb.has_single_bit_diffusion(SWAP01)
    with pytest.raises(NotBijective):
        sb.has_single_bit_diffusion(ZERO)


def test_invert():
    assert sb.invert(IDENTITY) == IDENTITY
    assert sb.invert(SWAP01) == SWAP01
    assert sb.invert(SHIFT) == UNSHIFT
    s = sb.invert(PRESENT)
    assert all(s(PRESENT(x)) == x for x in range(16))
    with pytest.raises(NotBijective):
        sb.invert(ZERO)


def test_lut_block_examples():
    words = np.frombuffer(sb.to_lut_block(IDENTITY), dtype="<u2")
    assert list(words) == [0xAAAA, 0xCCCC, 0xF0F0, 0xFF00]
    assert sb.to_lut_block(ZERO) == bytes(8)
    assert list(np.frombuffer(sb.to_lut_block(PRESENT), dtype="<u2")) == naive_lut_words(PRESENT.table)
    with pytest.raises(WrongLength):
        sb.from_lut_block(bytes(7))


def test_lut_block_round_trip():
    r = random.Random(3)
    for _ in range(50):
        s = SBox4(tuple(r.randrange(16) for _ in range(16)))
        assert sb.from_lut_block(sb.to_lut_block(s)) == s


def test_hex_and_packed():
    assert SBox4.from_hex("c56b90ad3ef84712") == PRESENT
    assert SBox4.from_packed(PRESENT.packed) == PRESENT
    assert PRESENT.hex() == "c56b90ad3ef84712"


def test_affine_pair_requires_invertible():
    with pytest.raises(ValueError):
        sb.AffinePair((1, 2, 4, 0), (1, 2, 4, 8))


def test_matrix_helpers():
    r = random.Random(4)
    for _ in range(20):
        m = sb.random_invertible_matrix(r)
        inv = sb.mat_inverse(m)
        assert all(sb.mat_apply(inv, sb.mat_apply(m, x)) == x for x in range(16))
        cols = [sb.mat_apply(m, 1 << i) for i in range(4)]
        assert sb.mat_from_columns(cols) == tuple(m)


def test_zero_basis_construction_gives_diffusion():
    pairs = sb.zero_basis_pairs(PRESENT)
    assert len(pairs) == 16
    r = random.Random(5)
    for _ in range(20):
        p = sb.diffusing_affine_pair(PRESENT, r)
        t = sb.affine_transform(PRESENT, p)
        assert sb.is_optimal(t) and sb.has_single_bit_diffusion(t)


def test_zero_basis_count_matches_brute_force():
    # B.S(A.x ^ a) ^ b diffuses iff A's columns and B^-1's columns form a
    # zero basis pair; count the pairs by brute force over column choices
    ddt = naive_ddt(PRESENT.table)
    bases = [u for u in sb._BASES.tolist()]
    brute = sum(
        1 for u in bases for v in bases if all(ddt[a][b] == 0 for a in u for b in v)
    )
    assert brute == len(sb.zero_basis_pairs(PRESENT))


def test_census_small_properties(library):
    assert len(library) > 0
    assert IDENTITY not in library
    assert (library.packed[1:] > library.packed[:-1]).all()  # strictly lexicographic
    r = random.Random(6)
    for _ in range(200):
        s = library[r.randrange(len(library))]
        assert naive_optimal(s.table) and sb.is_involution(s)


def test_census_cache_file_format(library, tmp_path):
    path = tmp_path / "c.sbx"
    sb.write_cache(library, path)
    data = path.read_bytes()
    assert data[:4] == b"SBX1"
    assert int.from_bytes(data[4:8], "little") == len(library)
    assert len(data) == 8 + 8 * len(library)
    assert sb.from_lut_block(data[8:16]) == library[0]
    assert sb.SBoxLibrary.from_bytes(data) == library


def test_cache_write_failure(library, tmp_path):
    from sucsim.errors import CacheWriteFailure

    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(CacheWriteFailure):
        sb.write_cache(library, blocker / "sub" / "c.sbx")


def test_sample_involution(library):
    t = Trng(bytes(32))
    for _ in range(50):
        s = sb.sample_optimal(t, require_involution=True, library=library)
        assert sb.is_involution(s) and sb.is_optimal(s)


def test_sample_non_involution_with_filter(library):
    t = Trng(bytes(32))
    for _ in range(50):
        s = sb.sample_optimal(t, require_single_bit_diffusion=True, library=library)
        assert naive_optimal(s.table) and naive_single_bit_diffusion(s.table)


def test_sample_plain_optimal(library):
    t = Trng(bytes(32))
    seen = set()
    for _ in range(50):
        s = sb.sample_optimal(t, library=library)
        assert sb.is_optimal(s)
        seen.add(s.table)
    assert len(seen) == 50


def test_sample_determinism(library):
    a = [sb.sample_optimal(Trng(b"\x07" * 32), require_single_bit_diffusion=True, library=library) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_involutive_filter_is_exhausted(library):
    # no optimal involution diffuses single bits, so this must hit the bound
    with pytest.raises(FilterExhausted):
        sb.sample_optimal(Trng(bytes(32)), True, True, library=library, max_retries=200)


@pytest.mark.slow
def test_no_optimal_involution_has_single_bit_diffusion(library):
    packed = library.packed
    tabs = (packed[:, None] >> (4 * (15 - np.arange(16, dtype=np.uint64)))) & np.uint64(0xF)
    tabs = tabs.astype(np.int64)
    x = np.arange(16)
    hit = np.zeros(len(tabs), dtype=bool)
    for a in (1, 2, 4, 8):
        d = tabs[:, x ^ a] ^ tabs
        hit |= np.isin(d, (1, 2, 4, 8)).any(axis=1)
    assert hit.all()
