import hashlib

import pytest

from sucsim.errors import TrngDestroyed
from sucsim.trng import Trng, randbelow

SEED = bytes(range(32))


def test_first_block_vector():
    # stream block i is SHA-256(seed || i as 8-byte little-endian), MSB first
    expected = hashlib.sha256(SEED + (0).to_bytes(8, "little")).digest()
    assert Trng(SEED).random_bytes(32) == expected


def test_bits_span_blocks():
    t = Trng(SEED)
    blocks = b"".join(hashlib.sha256(SEED + i.to_bytes(8, "little")).digest() for i in range(2))
    whole = int.from_bytes(blocks, "big")
    assert t.getrandbits(100) == whole >> 412
    assert t.getrandbits(300) == (whole >> 112) & ((1 << 300) - 1)
    assert t.bits_consumed == 400


def test_same_seed_same_stream():
    a, b = Trng(SEED), Trng(SEED)
    assert [a.getrandbits(13) for _ in range(50)] == [b.getrandbits(13) for _ in range(50)]
    assert Trng(SEED).random_bytes(16) != Trng(b"\x01" + SEED[1:]).random_bytes(16)


def test_randbelow_range_and_counter():
    t = Trng(SEED)
    vals = [t.randbelow(10) for _ in range(1000)]
    assert set(vals) == set(range(10))
    assert t.bits_consumed >= 4000 and t.bits_consumed % 4 == 0


def test_randbelow_helper_accepts_stdlib_random():
    import random

    r = random.Random(1)
    assert all(0 <= randbelow(r, 7) < 7 for _ in range(100))


def test_seed_validation():
    with pytest.raises(ValueError):
        Trng(b"short")
    with pytest.raises(ValueError):
        Trng.from_hex("zz" * 32)
    assert Trng.from_hex(SEED.hex()).random_bytes(8) == Trng(SEED).random_bytes(8)


def test_destroy():
    t = Trng(SEED)
    t.getrandbits(8)
    t.destroy()
    assert t.destroyed
    with pytest.raises(TrngDestroyed):
        t.getrandbits(1)


def test_os_seeding_differs():
    assert Trng.from_os().random_bytes(16) != Trng.from_os().random_bytes(16)
