"""4-bit S-box lab: tables, optimality tests, the involutive census, sampling
and the LUT-block (bitstream) encoding.

Conventions:
  * Diff(S) = max DDT entry over a != 0.
  * Lin(S)  = max |2 #{x : a.x = b.S(x)} - 16| over all a and b != 0.
  * optimal = bijective, Lin = 8, Diff = 4.
"""
from __future__ import annotations

import functools
import itertools
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import (
    CacheWriteFailure,
    FilterExhausted,
    InvalidSBox,
    NotBijective,
    WrongLength,
)
from .trng import randbelow

CACHE_MAGIC = b"SBX1"
MAX_RETRIES = 10_000
_X = np.arange(16)
_WEIGHT_ONE = (1, 2, 4, 8)


@dataclass(frozen=True)
class SBox4:
    table: tuple[int, ...]

    def __post_init__(self):
        t = tuple(self.table)
        if len(t) != 16:
            raise InvalidSBox(f"S-box needs 16 entries, got {len(t)}")
        for v in t:
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or not 0 <= v <= 15:
                raise InvalidSBox(f"S-box entry {v!r} is not a nibble")
        object.__setattr__(self, "table", tuple(int(v) for v in t))

    def __call__(self, x: int) -> int:
        return self.table[x]

    def __iter__(self) -> Iterator[int]:
        return iter(self.table)

    def __len__(self) -> int:
        return 16

    def __repr__(self):
        return f"SBox4({''.join(f'{v:x}' for v in self.table)})"

    @property
    def packed(self) -> int:
        """Table as a 64-bit int, S(0) in the top nibble (sorts lexicographically)."""
        p = 0
        for v in self.table:
            p = (p << 4) | v
        return p

    @classmethod
    def from_packed(cls, p: int) -> "SBox4":
        p = int(p)
        return cls(tuple((p >> (4 * (15 - x))) & 0xF for x in range(16)))

    @classmethod
    def from_hex(cls, text: str) -> "SBox4":
        text = text.strip().lower().replace(",", "").replace(" ", "")
        if len(text) != 16:
            raise InvalidSBox("hex S-box must have 16 digits")
        try:
            return cls(tuple(int(c, 16) for c in text))
        except ValueError:
            raise InvalidSBox(f"not a hex S-box: {text!r}") from None

    def hex(self) -> str:
        return "".join(f"{v:x}" for v in self.table)


IDENTITY = SBox4(tuple(range(16)))
# PRESENT S-box, a well-known optimal example.
PRESENT = SBox4((0xC, 5, 6, 0xB, 9, 0, 0xA, 0xD, 3, 0xE, 0xF, 8, 4, 7, 1, 2))


def as_sbox(s) -> SBox4:
    return s if isinstance(s, SBox4) else SBox4(tuple(s))


def _arr(s) -> np.ndarray:
    return np.array(as_sbox(s).table, dtype=np.int64)


def _parity(v):
    v = v ^ (v >> 2)
    v = v ^ (v >> 1)
    return v & 1


def diff_table(s) -> np.ndarray:
    """entry[a][b] = #{x : S(x ^ a) ^ S(x) = b}."""
    t = _arr(s)
    out = t[_X[:, None] ^ _X[None, :]] ^ t[None, :]
    ddt = np.zeros((16, 16), dtype=np.int64)
    np.add.at(ddt, (np.repeat(_X, 16), out.ravel()), 1)
    return ddt


def lin_table(s) -> np.ndarray:
    """entry[a][b] = |2 #{x : a.x = b.S(x)} - 16| (absolute Walsh value)."""
    t = _arr(s)
    pa = 1 - 2 * _parity(_X[:, None] & _X[None, :])  # [a, x]
    pb = 1 - 2 * _parity(_X[:, None] & t[None, :])  # [b, x]
    return np.abs(pa @ pb.T)


def differential_uniformity(s) -> int:
    return int(diff_table(s)[1:].max())


def linearity(s) -> int:
    return int(lin_table(s)[:, 1:].max())


def nonlinearity(s) -> int:
    return 8 - linearity(s) // 2


def is_bijective(s) -> bool:
    return len(set(as_sbox(s).table)) == 16


def is_optimal(s) -> bool:
    s = as_sbox(s)
    return is_bijective(s) and linearity(s) == 8 and differential_uniformity(s) == 4


def is_involution(s) -> bool:
    t = as_sbox(s).table
    return all(t[t[x]] == x for x in range(16))


def has_single_bit_diffusion(s) -> bool:
    """No single-bit input difference yields a single-bit output difference."""
    s = as_sbox(s)
    if not is_bijective(s):
        raise NotBijective("single-bit diffusion is defined for bijections")
    t = s.table
    for a in _WEIGHT_ONE:
        for x in range(16):
            d = t[x ^ a] ^ t[x]
            if d & (d - 1) == 0:
                return False
    return True


def invert(s) -> SBox4:
    s = as_sbox(s)
    if not is_bijective(s):
        raise NotBijective(f"{s!r} is not a bijection")
    inv = [0] * 16
    for x, y in enumerate(s.table):
        inv[y] = x
    return SBox4(tuple(inv))


# Affine equivalence. A 4x4 GF(2) matrix is a tuple of 4 row masks; bit i of
# M.x is parity(row_i & x).


def mat_apply(m: Sequence[int], x: int) -> int:
    y = 0
    for i, row in enumerate(m):
        y |= (bin(row & x).count("1") & 1) << i
    return y


def mat_rank(m: Sequence[int]) -> int:
    rows = [r & 0xF for r in m]
    rank = 0
    for bit in range(4):
        pivot = next((i for i in range(rank, len(rows)) if rows[i] >> bit & 1), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i] >> bit & 1:
                rows[i] ^= rows[rank]
        rank += 1
    return rank


@dataclass(frozen=True)
class AffinePair:
    A: tuple[int, int, int, int]
    B: tuple[int, int, int, int]
    a: int = 0
    b: int = 0

    def __post_init__(self):
        if mat_rank(self.A) != 4 or mat_rank(self.B) != 4:
            raise ValueError("affine pair matrices must be invertible over GF(2)")


def affine_transform(s, p: AffinePair) -> SBox4:
    """x -> B.S(A.x ^ a) ^ b; preserves Lin and Diff."""
    t = as_sbox(s).table
    return SBox4(tuple(mat_apply(p.B, t[mat_apply(p.A, x) ^ p.a]) ^ p.b for x in range(16)))


def mat_from_columns(cols: Sequence[int]) -> tuple[int, int, int, int]:
    """Matrix whose i-th column is ``cols[i]`` (so M.e_i = cols[i])."""
    return tuple(sum(((c >> r) & 1) << i for i, c in enumerate(cols)) for r in range(4))


def mat_inverse(m: Sequence[int]) -> tuple[int, int, int, int]:
    cols = [0] * 16
    for x in range(16):
        cols[mat_apply(m, x)] = x
    if sorted(cols) != list(range(16)):
        raise ValueError("matrix is singular")
    return mat_from_columns([cols[1 << i] for i in range(4)])


def random_invertible_matrix(rng) -> tuple[int, int, int, int]:
    while True:
        bits = rng.getrandbits(16)
        m = tuple((bits >> (4 * i)) & 0xF for i in range(4))
        if mat_rank(m) == 4:
            return m


def random_affine_pair(rng) -> AffinePair:
    A = random_invertible_matrix(rng)
    B = random_invertible_matrix(rng)
    return AffinePair(A, B, rng.getrandbits(4), rng.getrandbits(4))


_BASES = np.array(
    [u for u in itertools.combinations(range(1, 16), 4) if mat_rank(u) == 4], dtype=np.int64
)
_BASIS_MASKS = (np.int64(1) << _BASES).sum(axis=1)  # member set as a 16-bit mask
_BIT_WEIGHTS = np.int64(1) << np.arange(16, dtype=np.int64)


def zero_basis_pairs(s) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Pairs of bases (U, V) with DDT[u][v] = 0 for every u in U, v in V.

    An affine image B.S(A.x ^ a) ^ b has single-bit diffusion exactly when
    A maps the unit vectors onto such a U and B^-1 maps them onto the V.
    """
    zero = diff_table(s) == 0
    # bit b of free[U] set iff column b of the DDT is zero on all of U
    free = zero[_BASES].all(axis=1) @ _BIT_WEIGHTS
    rows = np.nonzero(np.bitwise_count(free) >= 4)[0]
    ok = (_BASIS_MASKS[None, :] & ~free[rows, None]) == 0
    ui, vi = np.nonzero(ok)
    ui = rows[ui]
    return [(tuple(map(int, _BASES[u])), tuple(map(int, _BASES[v]))) for u, v in zip(ui, vi)]


def _shuffled(items, rng):
    items = list(items)
    for i in range(len(items) - 1, 0, -1):
        j = randbelow(rng, i + 1)
        items[i], items[j] = items[j], items[i]
    return items


def diffusing_affine_pair(s, rng) -> AffinePair | None:
    """Random affine pair whose image of ``s`` has single-bit diffusion."""
    pairs = zero_basis_pairs(s)
    if not pairs:
        return None
    U, V = pairs[randbelow(rng, len(pairs))]
    A = mat_from_columns(_shuffled(U, rng))
    B = mat_inverse(mat_from_columns(_shuffled(V, rng)))
    return AffinePair(A, B, rng.getrandbits(4), rng.getrandbits(4))


# LUT-block encoding: four little-endian 16-bit words, bit t of word i is
# output bit i of S(t).


def to_lut_block(s) -> bytes:
    t = as_sbox(s).table
    words = [sum(((t[x] >> i) & 1) << x for x in range(16)) for i in range(4)]
    return struct.pack("<4H", *words)


def from_lut_block(block: bytes) -> SBox4:
    if len(block) != 8:
        raise WrongLength(f"LUT block must be 8 bytes, got {len(block)}")
    words = struct.unpack("<4H", bytes(block))
    return SBox4(tuple(sum(((words[i] >> x) & 1) << i for i in range(4)) for x in range(16)))


def _packed_to_blocks(packed: np.ndarray) -> np.ndarray:
    packed = packed.astype(np.uint64)
    nib = np.stack(
        [(packed >> np.uint64(4 * (15 - x))) & np.uint64(0xF) for x in range(16)], axis=1
    )
    words = np.zeros((len(packed), 4), dtype="<u2")
    for i in range(4):
        bits = (nib >> np.uint64(i)) & np.uint64(1)
        words[:, i] = (bits << np.arange(16, dtype=np.uint64)).sum(axis=1)
    return words


def _blocks_to_packed(words: np.ndarray) -> np.ndarray:
    words = words.astype(np.uint64)
    packed = np.zeros(len(words), dtype=np.uint64)
    for x in range(16):
        nib = np.zeros(len(words), dtype=np.uint64)
        for i in range(4):
            nib |= ((words[:, i] >> np.uint64(x)) & np.uint64(1)) << np.uint64(i)
        packed |= nib << np.uint64(4 * (15 - x))
    return packed


class SBoxLibrary(Sequence):
    """Immutable, lexicographically ordered S-box set backed by packed words."""

    def __init__(self, packed):
        self.packed = np.sort(np.asarray(packed, dtype=np.uint64))
        self.packed.setflags(write=False)

    def __len__(self):
        return len(self.packed)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [SBox4.from_packed(p) for p in self.packed[i]]
        return SBox4.from_packed(self.packed[i])

    def __contains__(self, s):
        try:
            p = np.uint64(as_sbox(s).packed)
        except InvalidSBox:
            return False
        i = np.searchsorted(self.packed, p)
        return bool(i < len(self.packed) and self.packed[i] == p)

    def __eq__(self, other):
        return isinstance(other, SBoxLibrary) and np.array_equal(self.packed, other.packed)

    def to_bytes(self) -> bytes:
        return CACHE_MAGIC + struct.pack("<I", len(self)) + _packed_to_blocks(self.packed).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SBoxLibrary":
        if data[:4] != CACHE_MAGIC or len(data) < 8:
            raise WrongLength("not an SBX1 cache file")
        (count,) = struct.unpack_from("<I", data, 4)
        if len(data) != 8 + 8 * count:
            raise WrongLength(f"cache declares {count} entries but holds {(len(data) - 8) / 8}")
        words = np.frombuffer(data, dtype="<u2", offset=8).reshape(count, 4)
        return cls(_blocks_to_packed(words))


def default_cache_path() -> Path:
    env = os.environ.get("SUCSIM_CACHE_DIR")
    base = Path(env) if env else Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "sucsim"
    return base / "involutive_optimal.sbx"


def write_cache(lib: SBoxLibrary, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(lib.to_bytes())
        os.replace(tmp, path)
    except OSError as exc:
        raise CacheWriteFailure(f"cannot write S-box cache {path}: {exc}") from exc


@functools.lru_cache(maxsize=4)
def _load_or_build(path: str) -> SBoxLibrary:
    p = Path(path)
    if p.exists():
        try:
            return SBoxLibrary.from_bytes(p.read_bytes())
        except (WrongLength, ValueError):
            pass  # corrupt cache: rebuild below
    lib = SBoxLibrary(kernels.enumerate_involutive_optimal())
    write_cache(lib, p)
    return lib


def enumerate_involutive_optimal(cache_path=None) -> SBoxLibrary:
    """All optimal involutions on 4 bits, cached in SBX1 format."""
    return _load_or_build(str(cache_path or default_cache_path()))


def sample_optimal(
    rng,
    require_involution: bool = False,
    require_single_bit_diffusion: bool = False,
    library: SBoxLibrary | None = None,
    max_retries: int = MAX_RETRIES,
) -> SBox4:
    """Draw an optimal S-box.

    Involutions come uniformly from the census; otherwise a census member is
    pushed through a random affine pair. With single-bit diffusion requested
    on a non-involution the pair is drawn among those that give the property
    (bases admitting none are rejected); involutions are filtered by plain
    rejection.
    """
    lib = library if library is not None else enumerate_involutive_optimal()
    for _ in range(max_retries):
        s = lib[randbelow(rng, len(lib))]
        if not require_involution:
            if require_single_bit_diffusion:
                pair = diffusing_affine_pair(s, rng)
                if pair is None:
                    continue
            else:
                pair = random_affine_pair(rng)
            s = affine_transform(s, pair)
        if require_single_bit_diffusion and not has_single_bit_diffusion(s):
            continue
        return s
    raise FilterExhausted(
        f"no S-box passed the filters in {max_retries} draws "
        f"(involution={require_involution}, single_bit_diffusion={require_single_bit_diffusion})"
    )
