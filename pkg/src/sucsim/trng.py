"""Deterministic stand-in for the device TRNG.

Stream: block ``i`` is ``SHA-256(seed || i as 8-byte little-endian)``; blocks
are read most-significant bit first. Every bit handed out is counted so the
GENIE can report how much randomness personalization really consumed.
"""
import hashlib
import secrets

from .errors import TrngDestroyed

SEED_BYTES = 32


class Trng:
    def __init__(self, seed: bytes):
        seed = bytes(seed)
        if len(seed) != SEED_BYTES:
            raise ValueError(f"seed must be {SEED_BYTES} bytes, got {len(seed)}")
        self._seed = seed
        self._counter = 0
        self._buf = 0
        self._nbuf = 0
        self._dead = False
        self.bits_consumed = 0

    @classmethod
    def from_hex(cls, text: str) -> "Trng":
        try:
            seed = bytes.fromhex(text)
        except ValueError:
            raise ValueError("seed is not valid hex") from None
        return cls(seed)

    @classmethod
    def from_os(cls) -> "Trng":
        """Non-reproducible seeding for production forging."""
        return cls(secrets.token_bytes(SEED_BYTES))

    def _refill(self):
        block = hashlib.sha256(self._seed + self._counter.to_bytes(8, "little")).digest()
        self._counter += 1
        self._buf = (self._buf << 256) | int.from_bytes(block, "big")
        self._nbuf += 256

    def getrandbits(self, k: int) -> int:
        if self._dead:
            raise TrngDestroyed("TRNG state was destroyed")
        if k < 0:
            raise ValueError("number of bits must be non-negative")
        while self._nbuf < k:
            self._refill()
        self._nbuf -= k
        out = self._buf >> self._nbuf
        self._buf &= (1 << self._nbuf) - 1
        self.bits_consumed += k
        return out

    def randbelow(self, n: int) -> int:
        """Uniform in [0, n) by rejection on ceil(log2 n) bits."""
        if n <= 0:
            raise ValueError("n must be positive")
        k = (n - 1).bit_length()
        while True:
            r = self.getrandbits(k)
            if r < n:
                return r

    randrange = randbelow

    def random_bytes(self, n: int) -> bytes:
        return self.getrandbits(8 * n).to_bytes(n, "big")

    def destroy(self):
        """Wipe the seed and buffered bits; further draws raise."""
        self._seed = b"\x00" * SEED_BYTES
        self._buf = 0
        self._nbuf = 0
        self._dead = True

    @property
    def destroyed(self) -> bool:
        return self._dead


def randbelow(rng, n: int) -> int:
    """Rejection-sample [0, n) from anything exposing ``getrandbits``."""
    if hasattr(rng, "randbelow"):
        return rng.randbelow(n)
    k = (n - 1).bit_length()
    while True:
        r = rng.getrandbits(k)
        if r < n:
            return r
