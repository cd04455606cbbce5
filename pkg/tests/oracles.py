"""Independent reference implementations used as test oracles.

Everything here works bit by bit from the definitions and shares no code
with the package.
"""
import math

import numpy as np


def bits(x, n=64):
    return [(x >> i) & 1 for i in range(n)]


def from_bits(bs):
    return sum(b << i for i, b in enumerate(bs))


def dot4(a, b):
    return bin(a & b).count("1") & 1


def naive_ddt(s):
    t = [[0] * 16 for _ in range(16)]
    for a in range(16):
        for x in range(16):
            t[a][s[x ^ a] ^ s[x]] += 1
    return t


def naive_lat(s):
    """|2 #{x : a.x = b.S(x)} - 16|"""
    t = [[0] * 16 for _ in range(16)]
    for a in range(16):
        for b in range(16):
            agree = sum(1 for x in range(16) if dot4(a, x) == dot4(b, s[x]))
            t[a][b] = abs(2 * agree - 16)
    return t


def naive_diff(s):
    d = naive_ddt(s)
    return max(d[a][b] for a in range(1, 16) for b in range(16))


def naive_lin(s):
    lt = naive_lat(s)
    return max(lt[a][b] for a in range(16) for b in range(1, 16))


def naive_optimal(s):
    return sorted(s) == list(range(16)) and naive_lin(s) == 8 and naive_diff(s) == 4


def naive_single_bit_diffusion(s):
    d = naive_ddt(s)
    return all(d[a][b] == 0 for a in (1, 2, 4, 8) for b in (1, 2, 4, 8))


def naive_lut_words(s):
    return [sum(((s[t] >> i) & 1) << t for t in range(16)) for i in range(4)]


# NI cipher from the definitions; the bit map is p(i) = 4i mod 63, p(63) = 63
def table1(i):
    return 63 if i == 63 else (4 * i) % 63


def naive_ni_round_keys(luts):
    stored = [from_bits([(luts[j] >> c) & 1 for j in range(64)]) for c in range(16)]
    seq = list(range(16)) + list(range(15, -1, -1))
    return [stored[c] for c in seq]


def naive_sbox_layer(x, sboxes):
    return sum(sboxes[i][(x >> (4 * i)) & 0xF] << (4 * i) for i in range(16))


def naive_permute(x):
    b = bits(x)
    out = [0] * 64
    for i in range(64):
        out[table1(i)] = b[i]
    return from_bits(out)


def naive_ni_encrypt(sboxes, luts, x):
    keys = naive_ni_round_keys(luts)
    for r in range(31):
        x = naive_permute(naive_sbox_layer(x ^ keys[r], sboxes))
    return x ^ keys[31]


# I cipher
def naive_diffuse(x):
    ns = [(x >> (4 * i)) & 0xF for i in range(16)]
    total = 0
    for v in ns:
        total ^= v
    return sum((v ^ total) << (4 * i) for i, v in enumerate(ns))


def naive_i_round_keys(luts):
    keys = []
    for c in range(16):
        ns = [0] + [sum(((luts[4 * (k - 1) + j] >> c) & 1) << j for j in range(4)) for k in range(1, 16)]
        for v in ns[1:]:
            ns[0] ^= v
        keys.append(sum(v << (4 * i) for i, v in enumerate(ns)))
    seq = list(range(16)) + list(range(14, -1, -1))
    return [keys[c] for c in seq]


def naive_i_apply(sboxes, luts, x):
    keys = naive_i_round_keys(luts)
    x = naive_sbox_layer(x, sboxes)
    for r in range(31):
        x = naive_sbox_layer(naive_diffuse(x) ^ keys[r], sboxes)
    return x


def log2_factorial(m):
    return math.lgamma(m + 1) / math.log(2)


# batch property check for large S-box sets
def batch_is_optimal_involution(tables):
    """tables: (N, 16) ints. Returns a bool array."""
    t = np.asarray(tables, dtype=np.int64)
    n = len(t)
    x = np.arange(16)
    ok = np.all(np.sort(t, axis=1) == x, axis=1)
    ok &= np.all(t[np.arange(n)[:, None], t] == x, axis=1)
    rows = np.repeat(np.arange(n), 16)
    diff = np.zeros(n, dtype=np.int64)
    for a in range(1, 16):
        d = (t[:, x ^ a] ^ t).ravel()
        counts = np.bincount(rows * 16 + d, minlength=16 * n).reshape(n, 16)
        diff = np.maximum(diff, counts.max(axis=1))
    par = np.array([bin(v).count("1") & 1 for v in range(16)])
    h = 1 - 2 * par[np.bitwise_and.outer(x, x)]  # (a, x)
    lin = np.zeros(n, dtype=np.int64)
    for b in range(1, 16):
        f = 1 - 2 * par[t & b]  # (N, x)
        lin = np.maximum(lin, np.abs(f @ h.T).max(axis=1))
    return ok & (diff == 4) & (lin == 8)
