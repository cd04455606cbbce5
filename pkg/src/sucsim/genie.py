"""Virtual bitstream templates and the one-time personalization GENIE.

File layout (all integers little-endian)::

    "SUCB" | version u16 | flags u8 | count u16 |
    count x (template_id u16, kind u8, offset u32, length u32) | body

Offsets are relative to the body. Flags: bit 0 locked, bit 1 encrypted
(reserved, always clear: bitstream encryption is a pass-through here),
bit 2 personalized.

Regions: SBOX_LAYER holds 16 LUT blocks of 8 bytes (S-box i at 8i);
KEY_BANK holds the key LUT words as u16 (64 for NI, 60 for I); META is one
byte, 0 = NI and 1 = I.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum
from fractions import Fraction
from math import ceil
from pathlib import Path

from .cipher_i import ISucSpec
from .cipher_i import N_LUTS as I_LUTS
from .cipher_ni import N_LUTS as NI_LUTS
from .cipher_ni import NiSucSpec
from .errors import (
    AlreadyLocked,
    DefaultTemplateNotPersonalized,
    MalformedDirectory,
    NotPersonalized,
    PayloadTooLarge,
)
from .sbox import SBoxLibrary, from_lut_block, sample_optimal, to_lut_block

MAGIC = b"SUCB"
FORMAT_VERSION = 1
FLAG_LOCKED = 0x01
FLAG_ENCRYPTED = 0x02
FLAG_PERSONALIZED = 0x04
MAX_PAYLOAD = 1 << 24

_HEADER = struct.Struct("<4sHBH")
_ENTRY = struct.Struct("<HBII")

KINDS = ("ni", "i")
KIND_CODE = {"ni": 0, "i": 1}
SBOX_REGION_BYTES = 128
KEY_REGION_BYTES = {"ni": 2 * NI_LUTS, "i": 2 * I_LUTS}
KEY_BITS = {"ni": 16 * NI_LUTS, "i": 16 * I_LUTS}

# Nominal class sizes used for the entropy ledger: 145 920 optimal
# involutions and 2^20.4 optimal S-boxes, rounded up to whole bits per pick.
NOMINAL_INVOLUTIVE_CLASS = 145_920
NOMINAL_OPTIMAL_CLASS_LOG2 = Fraction(204, 10)
SELECTION_BITS = {
    "i": (NOMINAL_INVOLUTIVE_CLASS - 1).bit_length(),
    "ni": ceil(NOMINAL_OPTIMAL_CLASS_LOG2),
}

# S-box filters per cipher kind. No optimal involution has single-bit
# diffusion, so the I kind cannot carry that filter.
DEFAULT_FILTERS = {
    "ni": {"require_involution": False, "require_single_bit_diffusion": True},
    "i": {"require_involution": True, "require_single_bit_diffusion": False},
}


class TemplateKind(IntEnum):
    SBOX_LAYER = 0
    KEY_BANK = 1
    META = 2


@dataclass(frozen=True)
class TemplateEntry:
    template_id: int
    kind: TemplateKind
    offset: int
    length: int

    @property
    def end(self) -> int:
        return self.offset + self.length


@dataclass(frozen=True)
class VirtualBitstream:
    entries: tuple[TemplateEntry, ...]
    body: bytes
    flags: int = 0
    version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "body", bytes(self.body))
        self.validate()

    # structure

    def validate(self):
        if self.version != FORMAT_VERSION:
            raise MalformedDirectory(f"unsupported bitstream version {self.version}")
        if self.flags & FLAG_ENCRYPTED:
            raise MalformedDirectory("encrypted bitstreams must be decrypted before use")
        kinds = sorted(e.kind for e in self.entries)
        if kinds != [TemplateKind.SBOX_LAYER, TemplateKind.KEY_BANK, TemplateKind.META]:
            raise MalformedDirectory("directory needs exactly one SBOX_LAYER, KEY_BANK and META")
        if len({e.template_id for e in self.entries}) != len(self.entries):
            raise MalformedDirectory("duplicate template id")
        spans = sorted((e.offset, e.end) for e in self.entries)
        for (_, end), (start, _) in zip(spans, spans[1:]):
            if start < end:
                raise MalformedDirectory("template regions overlap")
        if spans[-1][1] > len(self.body):
            raise MalformedDirectory("template region runs past the body")
        meta = self.entry(TemplateKind.META)
        if meta.length != 1 or self.body[meta.offset] not in (0, 1):
            raise MalformedDirectory("META region must be one byte holding 0 (NI) or 1 (I)")
        if self.entry(TemplateKind.SBOX_LAYER).length != SBOX_REGION_BYTES:
            raise MalformedDirectory("SBOX_LAYER region must be 128 bytes")
        if self.entry(TemplateKind.KEY_BANK).length != KEY_REGION_BYTES[self.cipher_kind]:
            raise MalformedDirectory("KEY_BANK length does not match the cipher kind")

    def entry(self, kind: TemplateKind) -> TemplateEntry:
        for e in self.entries:
            if e.kind == kind:
                return e
        raise MalformedDirectory(f"no {kind.name} region")

    def region(self, kind: TemplateKind) -> bytes:
        e = self.entry(kind)
        return self.body[e.offset : e.end]

    def with_region(self, kind: TemplateKind, data: bytes) -> "VirtualBitstream":
        e = self.entry(kind)
        if len(data) != e.length:
            raise MalformedDirectory(f"{kind.name} data must be {e.length} bytes")
        return replace(self, body=self.body[: e.offset] + bytes(data) + self.body[e.end :])

    @property
    def cipher_kind(self) -> str:
        e = self.entry(TemplateKind.META)
        return KINDS[self.body[e.offset]]

    @property
    def locked(self) -> bool:
        return bool(self.flags & FLAG_LOCKED)

    @property
    def personalized(self) -> bool:
        return bool(self.flags & FLAG_PERSONALIZED)

    def template_spans(self) -> list[tuple[int, int]]:
        """Absolute (start, end) byte ranges of the template regions in the file."""
        base = _HEADER.size + _ENTRY.size * len(self.entries)
        return [(base + e.offset, base + e.end) for e in self.entries]

    # serialization

    def to_bytes(self) -> bytes:
        out = [_HEADER.pack(MAGIC, self.version, self.flags, len(self.entries))]
        out += [_ENTRY.pack(e.template_id, e.kind, e.offset, e.length) for e in self.entries]
        out.append(self.body)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "VirtualBitstream":
        data = bytes(data)
        if len(data) < _HEADER.size:
            raise MalformedDirectory("bitstream shorter than its header")
        magic, version, flags, count = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise MalformedDirectory("bad magic, not a SUCB bitstream")
        pos = _HEADER.size
        if len(data) < pos + count * _ENTRY.size:
            raise MalformedDirectory("template directory truncated")
        entries = []
        for _ in range(count):
            tid, kind, off, length = _ENTRY.unpack_from(data, pos)
            pos += _ENTRY.size
            try:
                kind = TemplateKind(kind)
            except ValueError:
                raise MalformedDirectory(f"unknown template kind {kind}") from None
            entries.append(TemplateEntry(tid, kind, off, length))
        return cls(tuple(entries), data[pos:], flags, version)


def read_bitstream(path) -> VirtualBitstream:
    return VirtualBitstream.from_bytes(Path(path).read_bytes())


def write_bitstream(bs: VirtualBitstream, path) -> None:
    Path(path).write_bytes(bs.to_bytes())


def build_template(app_payload: bytes, kind: str) -> VirtualBitstream:
    """The unit-independent template: payload with zero-filled cipher regions.

    The regions sit in the middle of the payload, identically for every unit.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    app_payload = bytes(app_payload)
    if len(app_payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(app_payload)} bytes exceeds {MAX_PAYLOAD}")
    half = len(app_payload) // 2
    sbox_off = half
    key_off = sbox_off + SBOX_REGION_BYTES
    meta_off = key_off + KEY_REGION_BYTES[kind]
    body = (
        app_payload[:half]
        + bytes(SBOX_REGION_BYTES)
        + bytes(KEY_REGION_BYTES[kind])
        + bytes([KIND_CODE[kind]])
        + app_payload[half:]
    )
    entries = (
        TemplateEntry(0, TemplateKind.SBOX_LAYER, sbox_off, SBOX_REGION_BYTES),
        TemplateEntry(1, TemplateKind.KEY_BANK, key_off, KEY_REGION_BYTES[kind]),
        TemplateEntry(2, TemplateKind.META, meta_off, 1),
    )
    return VirtualBitstream(entries, body)


@dataclass(frozen=True)
class EntropyLedger:
    """TRNG budget of one personalization.

    ``selection_bits`` is the nominal whole-bit cost of the 16 picks; whatever
    the sampler really drew beyond the nominal budget (index rejection,
    affine pairs, filter retries) is ``overdraw_bits``.
    """

    selection_bits: int
    key_bits: int
    overdraw_bits: int = 0
    kind: str = field(default="", compare=False)

    @property
    def total_bytes(self) -> int:
        return -(-(self.selection_bits + self.key_bits) // 8)

    @property
    def consumed_bits(self) -> int:
        return self.selection_bits + self.key_bits + self.overdraw_bits

    def lines(self) -> list[str]:
        return [
            f"kind={self.kind}",
            f"selection_bits={self.selection_bits}",
            f"key_bits={self.key_bits}",
            f"entropy_bytes={self.total_bytes}",
            f"overdraw_bits={self.overdraw_bits}",
        ]


def nominal_ledger(kind: str) -> EntropyLedger:
    return EntropyLedger(16 * SELECTION_BITS[kind], KEY_BITS[kind], 0, kind)


def sample_sboxes(kind: str, trng, library: SBoxLibrary | None = None, **filters):
    opts = dict(DEFAULT_FILTERS[kind])
    opts.update(filters)
    return [sample_optimal(trng, library=library, **opts) for _ in range(16)]


def _spec_from_parts(kind, sboxes, key_bytes, checked=True):
    words = struct.unpack(f"<{len(key_bytes) // 2}H", key_bytes)
    cls = NiSucSpec if kind == "ni" else ISucSpec
    return cls(tuple(sboxes), words, checked=checked)


def sample_instance(kind: str, trng, library: SBoxLibrary | None = None, **filters):
    """Draw a cipher instance exactly as ``personalize`` would."""
    sboxes = sample_sboxes(kind, trng, library, **filters)
    key_bytes = trng.random_bytes(KEY_REGION_BYTES[kind])
    return _spec_from_parts(kind, sboxes, key_bytes)


def personalize(bs: VirtualBitstream, trng, library: SBoxLibrary | None = None, **filters):
    """Fill the template regions from the TRNG; returns (BS'_u, ledger)."""
    if bs.locked:
        raise AlreadyLocked("bitstream is locked; the GENIE cannot run again")
    bs.validate()
    kind = bs.cipher_kind
    start = trng.bits_consumed
    sboxes = sample_sboxes(kind, trng, library, **filters)
    key_bytes = trng.random_bytes(KEY_REGION_BYTES[kind])
    out = bs.with_region(TemplateKind.SBOX_LAYER, b"".join(to_lut_block(s) for s in sboxes))
    out = out.with_region(TemplateKind.KEY_BANK, key_bytes)
    out = replace(out, flags=out.flags | FLAG_PERSONALIZED)
    nominal = nominal_ledger(kind)
    used = trng.bits_consumed - start
    ledger = replace(nominal, overdraw_bits=used - nominal.selection_bits - nominal.key_bits)
    return out, ledger


def lock(bs: VirtualBitstream, trng=None) -> VirtualBitstream:
    """Set the one-way lock; optionally wipe the TRNG the GENIE used."""
    if not bs.personalized or not any(bs.region(TemplateKind.SBOX_LAYER)):
        raise NotPersonalized("only a personalized bitstream can be locked")
    if trng is not None:
        trng.destroy()
    return replace(bs, flags=bs.flags | FLAG_LOCKED)


def load_device(bs: VirtualBitstream):
    """Instantiate the cipher described by a personalized bitstream."""
    bs.validate()
    sbox_bytes = bs.region(TemplateKind.SBOX_LAYER)
    if not any(sbox_bytes):
        raise DefaultTemplateNotPersonalized("S-box region still holds the default fill")
    sboxes = [from_lut_block(sbox_bytes[8 * i : 8 * i + 8]) for i in range(16)]
    return _spec_from_parts(bs.cipher_kind, sboxes, bs.region(TemplateKind.KEY_BANK))


def device_template_bytes(spec) -> dict[TemplateKind, bytes]:
    """Template-region contents that encode ``spec`` (inverse of load_device)."""
    kind = spec.kind
    return {
        TemplateKind.SBOX_LAYER: b"".join(to_lut_block(s) for s in spec.sboxes),
        TemplateKind.KEY_BANK: struct.pack(f"<{len(spec.key_luts)}H", *spec.key_luts),
        TemplateKind.META: bytes([KIND_CODE[kind]]),
    }


def genie_storage_cost(set_size: int, bits_per_entry: int) -> Fraction:
    """Mbit needed to store a mapping library (2^20 bits per Mbit)."""
    if set_size < 0 or bits_per_entry < 0:
        raise ValueError("sizes must be non-negative")
    return Fraction(set_size * bits_per_entry, 1 << 20)
