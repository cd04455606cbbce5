"""State helpers and byte-sliced layer tables shared by both cipher classes.

Bit 0 is the least significant bit of a 64-bit state; nibble i is bits
[4i, 4i+3] and is processed by S-box i.
"""
import numpy as np

MASK64 = (1 << 64) - 1


def nibble(x: int, i: int) -> int:
    return (x >> (4 * i)) & 0xF


def nibbles(x: int) -> list[int]:
    return [(x >> (4 * i)) & 0xF for i in range(16)]


def from_nibbles(ns) -> int:
    out = 0
    for i, v in enumerate(ns):
        out |= (v & 0xF) << (4 * i)
    return out


def hamming(a, b):
    """Hamming distance; element-wise for numpy arrays."""
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.bitwise_count(np.asarray(a, dtype=np.uint64) ^ np.asarray(b, dtype=np.uint64))
    return ((a ^ b) & MASK64).bit_count()


def check_state(x: int) -> int:
    x = int(x)
    if not 0 <= x <= MASK64:
        raise ValueError(f"state {x:#x} does not fit in 64 bits")
    return x


def as_states(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.uint64).reshape(-1))


def sbox_layer_tables(sboxes) -> np.ndarray:
    """8 x 256 table: entry [j, v] is the substituted byte v placed at byte j."""
    tabs = [np.array(s.table, dtype=np.uint64) for s in sboxes]
    v = np.arange(256, dtype=np.uint64)
    out = np.empty((8, 256), dtype=np.uint64)
    for j in range(8):
        lo = tabs[2 * j][v & np.uint64(0xF)]
        hi = tabs[2 * j + 1][v >> np.uint64(4)]
        out[j] = (lo | (hi << np.uint64(4))) << np.uint64(8 * j)
    return out


def placed_bytes() -> np.ndarray:
    """8 x 256 table of raw byte values shifted to their byte position."""
    v = np.arange(256, dtype=np.uint64)
    return np.stack([v << np.uint64(8 * j) for j in range(8)])


def permute_bits(x: np.ndarray, perm) -> np.ndarray:
    """Vectorised bit permutation: output bit perm[i] = input bit i."""
    x = np.asarray(x, dtype=np.uint64)
    out = np.zeros_like(x)
    one = np.uint64(1)
    for i, p in enumerate(perm):
        out |= ((x >> np.uint64(i)) & one) << np.uint64(p)
    return out
