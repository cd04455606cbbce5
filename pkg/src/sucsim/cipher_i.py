"""Involutive SUC class.

32 substitution layers with the same involutive layer SL, the XOR-sum
diffusion between them and 31 round keys whose 16 nibbles XOR to zero. The
whole cipher is its own inverse: encryption and decryption are ``i_apply``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import IndexOutOfRange, InvalidSpec
from .sbox import SBox4, as_sbox, is_involution, is_optimal
from .spn import as_states, check_state, hamming, sbox_layer_tables

LAYERS = 32
N_KEYS = 31
N_LUTS = 60
_REPEAT = 0x1111111111111111


def nibble_sum(x):
    """XOR of the 16 nibbles (element-wise for uint64 arrays)."""
    for sh in (32, 16, 8, 4):
        x = x ^ (x >> sh)
    return x & 0xF


def diffuse(x: int) -> int:
    """Every output nibble is the input nibble XOR the XOR of all nibbles."""
    x = check_state(x)
    return x ^ (nibble_sum(x) * _REPEAT)


def diffuse_many(x) -> np.ndarray:
    x = as_states(x)
    return x ^ (nibble_sum(x) * np.uint64(_REPEAT))


def key_counter(r: int) -> int:
    if not 0 <= r < N_KEYS:
        raise IndexOutOfRange(f"I round-key index {r} outside [0, {N_KEYS - 1}]")
    return r if r <= 15 else 30 - r


@dataclass(frozen=True)
class ISucSpec:
    sboxes: tuple[SBox4, ...]
    key_luts: tuple[int, ...]
    checked: bool = field(default=True, compare=False, repr=False)

    kind = "i"

    def __post_init__(self):
        try:
            sboxes = tuple(as_sbox(s) for s in self.sboxes)
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from exc
        luts = tuple(int(w) for w in self.key_luts)
        if len(sboxes) != 16:
            raise InvalidSpec(f"need 16 S-boxes, got {len(sboxes)}")
        if len(luts) != N_LUTS:
            raise InvalidSpec(f"need {N_LUTS} key LUTs, got {len(luts)}")
        if any(not 0 <= w <= 0xFFFF for w in luts):
            raise InvalidSpec("key LUT words are 16-bit")
        for i, s in enumerate(sboxes):
            if not is_involution(s):
                raise InvalidSpec(f"S-box {i} is not an involution")
            if self.checked and not is_optimal(s):
                raise InvalidSpec(f"S-box {i} is not optimal")
        object.__setattr__(self, "sboxes", sboxes)
        object.__setattr__(self, "key_luts", luts)

    @classmethod
    def unchecked(cls, sboxes, key_luts) -> "ISucSpec":
        """Skip the optimality check (S-boxes must still be involutions)."""
        return cls(tuple(sboxes), tuple(key_luts), checked=False)

    @cached_property
    def stored_keys(self) -> tuple[int, ...]:
        keys = []
        for c in range(16):
            # bit (4 + j) of RK[c] = bit c of LUT_j; nibble 0 closes the XOR
            k = sum(((w >> c) & 1) << (4 + j) for j, w in enumerate(self.key_luts))
            keys.append(k | nibble_sum(k))
        return tuple(keys)

    @cached_property
    def _keys(self) -> np.ndarray:
        return np.array([self.stored_keys[key_counter(r)] for r in range(N_KEYS)], dtype=np.uint64)

    @cached_property
    def _sl(self) -> np.ndarray:
        return sbox_layer_tables(self.sboxes)

    def round_key(self, r: int) -> int:
        return self.stored_keys[key_counter(r)]

    def apply_many(self, x) -> np.ndarray:
        return kernels.i_apply(as_states(x), self._sl, self._keys)

    def round_states(self, x) -> np.ndarray:
        """(n, 32) states after each substitution layer."""
        return kernels.i_rounds(as_states(x), self._sl, self._keys)

    def apply(self, x: int) -> int:
        return int(self.apply_many([check_state(x)])[0])

    encrypt = decrypt = apply
    encrypt_many = decrypt_many = apply_many


def round_key_i(spec: ISucSpec, r: int) -> int:
    return spec.round_key(r)


def i_apply(spec: ISucSpec, x: int) -> int:
    return spec.apply(x)


@dataclass(frozen=True)
class CommutationCheck:
    holds: bool
    counterexample: int | None = None
    proven: bool = False  # nibble-XOR of the key is zero, so it holds for all x

    def __bool__(self):
        return self.holds


def check_commutation(k: int, rng=None, samples: int = 1000) -> CommutationCheck:
    """Does diffuse(x ^ k) == diffuse(x) ^ k?  Tests x = 0 then random x."""
    k = check_state(k)
    rng = rng if rng is not None else random.Random(k)
    xs = np.array([0] + [rng.getrandbits(64) for _ in range(samples)], dtype=np.uint64)
    kk = np.uint64(k)
    bad = np.nonzero(diffuse_many(xs ^ kk) != (diffuse_many(xs) ^ kk))[0]
    if len(bad):
        return CommutationCheck(False, int(xs[bad[0]]))
    return CommutationCheck(True, None, proven=nibble_sum(k) == 0)


def i_trace(spec: ISucSpec, x: int, flip_bit: int | None) -> list[int]:
    """Hamming distance after each of the 32 substitution layers."""
    x = check_state(x)
    if flip_bit is None:
        x2 = x
    elif 0 <= flip_bit < 64:
        x2 = x ^ (1 << flip_bit)
    else:
        raise IndexOutOfRange(f"flip bit {flip_bit} outside [0, 63]")
    st = spec.round_states([x, x2])
    return [int(d) for d in hamming(st[0], st[1])]


def diffusion_matrix() -> list[int]:
    """The diffusion layer as 64 column words (column i = diffuse(1 << i))."""
    return [diffuse(1 << i) for i in range(64)]

