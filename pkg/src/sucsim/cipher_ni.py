"""Non-involutive SUC class: 64-bit SPN, 31 rounds, fixed bit permutation,
round keys read from 64 random 16-bit LUTs.

Round r (r = 0..30): key XOR, substitution layer, bit permutation. A final
whitening key follows the last round. The 32 round keys come from a
palindromic up/down counter c(i) = min(i, 31 - i) into 16 stored keys, so the
decryption key order equals the encryption order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import IndexOutOfRange, InvalidSpec
from .sbox import SBox4, as_sbox, invert, is_bijective, is_optimal
from .spn import (
    as_states,
    check_state,
    hamming,
    permute_bits,
    placed_bytes,
    sbox_layer_tables,
)

ROUNDS = 31
N_KEYS = 32
N_LUTS = 64

# output bit position p(i) for input bit i
PERMUTATION = (
    0, 4, 8, 12, 16, 20, 24, 28,
    32, 36, 40, 44, 48, 52, 56, 60,
    1, 5, 9, 13, 17, 21, 25, 29,
    33, 37, 41, 45, 49, 53, 57, 61,
    2, 6, 10, 14, 18, 22, 26, 30,
    34, 38, 42, 46, 50, 54, 58, 62,
    3, 7, 11, 15, 19, 23, 27, 31,
    35, 39, 43, 47, 51, 55, 59, 63,
)  # fmt: skip
INVERSE_PERMUTATION = tuple(PERMUTATION.index(i) for i in range(64))


def permute64(x: int) -> int:
    x = check_state(x)
    out = 0
    for i in range(64):
        if x >> i & 1:
            out |= 1 << PERMUTATION[i]
    return out


def inverse_permute64(x: int) -> int:
    x = check_state(x)
    out = 0
    for i in range(64):
        if x >> i & 1:
            out |= 1 << INVERSE_PERMUTATION[i]
    return out


def key_counter(i: int) -> int:
    if not 0 <= i < N_KEYS:
        raise IndexOutOfRange(f"NI round-key index {i} outside [0, {N_KEYS - 1}]")
    return i if i <= 15 else 31 - i


@dataclass(frozen=True)
class NiSucSpec:
    sboxes: tuple[SBox4, ...]
    key_luts: tuple[int, ...]
    checked: bool = field(default=True, compare=False, repr=False)

    kind = "ni"

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
            if not is_bijective(s):
                raise InvalidSpec(f"S-box {i} is not a bijection")
            if self.checked and not is_optimal(s):
                raise InvalidSpec(f"S-box {i} is not optimal")
        object.__setattr__(self, "sboxes", sboxes)
        object.__setattr__(self, "key_luts", luts)

    @classmethod
    def unchecked(cls, sboxes, key_luts) -> "NiSucSpec":
        """Skip the optimality check (bijectivity is still required)."""
        return cls(tuple(sboxes), tuple(key_luts), checked=False)

    @cached_property
    def stored_keys(self) -> tuple[int, ...]:
        # bit j of RK[c] = bit c of LUT_j
        return tuple(
            sum(((w >> c) & 1) << j for j, w in enumerate(self.key_luts)) for c in range(16)
        )

    @cached_property
    def _keys(self) -> np.ndarray:
        return np.array([self.stored_keys[key_counter(i)] for i in range(N_KEYS)], dtype=np.uint64)

    @cached_property
    def _sp(self) -> np.ndarray:
        return permute_bits(sbox_layer_tables(self.sboxes), PERMUTATION)

    @cached_property
    def _pinv(self) -> np.ndarray:
        return permute_bits(placed_bytes(), INVERSE_PERMUTATION)

    @cached_property
    def _sinv(self) -> np.ndarray:
        return sbox_layer_tables([invert(s) for s in self.sboxes])

    def round_key(self, i: int) -> int:
        return self.stored_keys[key_counter(i)]

    def encrypt_many(self, x) -> np.ndarray:
        return kernels.ni_encrypt(as_states(x), self._sp, self._keys)

    def decrypt_many(self, y) -> np.ndarray:
        return kernels.ni_decrypt(as_states(y), self._pinv, self._sinv, self._keys)

    def round_states(self, x) -> np.ndarray:
        """(n, 31) states after each round, whitening key not applied."""
        return kernels.ni_rounds(as_states(x), self._sp, self._keys)

    def encrypt(self, x: int) -> int:
        return int(self.encrypt_many([check_state(x)])[0])

    def decrypt(self, y: int) -> int:
        return int(self.decrypt_many([check_state(y)])[0])


def round_key_ni(spec: NiSucSpec, i: int) -> int:
    return spec.round_key(i)


def ni_encrypt(spec: NiSucSpec, x: int) -> int:
    return spec.encrypt(x)


def ni_decrypt(spec: NiSucSpec, y: int) -> int:
    return spec.decrypt(y)


def ni_trace(spec: NiSucSpec, x: int, flip_bit: int | None) -> list[int]:
    """Per-round Hamming distance between x and x with ``flip_bit`` toggled.

    ``flip_bit=None`` gives the no-flip control (all zeros).
    """
    x = check_state(x)
    if flip_bit is None:
        x2 = x
    elif 0 <= flip_bit < 64:
        x2 = x ^ (1 << flip_bit)
    else:
        raise IndexOutOfRange(f"flip bit {flip_bit} outside [0, 63]")
    st = spec.round_states([x, x2])
    return [int(d) for d in hamming(st[0], st[1])]
