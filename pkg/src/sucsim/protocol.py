"""TA enrollment and identification: UIR store, frames, local and TCP channels.

Session (device speaks first)::

    device -> TA   HELLO      sn (8 bytes LE)
    TA -> device   CHALLENGE  y  (8 bytes LE)
    device -> TA   RESPONSE   x' (8 bytes LE)
    TA -> device   RESULT     0x01 accept / 0x00 reject

Frames are ``type u8 | length u16 LE | payload``.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import random
import socket
import socketserver
import struct
import tempfile
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    BindFailure,
    ChannelFailure,
    DuplicateChallengeRetryExceeded,
    DuplicateIndex,
    IoFailure,
    ParseError,
    ProtocolTimeout,
    ProtocolViolation,
    UnknownSerial,
)

log = logging.getLogger(__name__)

HELLO = 0x05
CHALLENGE = 0x01
RESPONSE = 0x02
RESULT = 0x06
PAYLOAD_LEN = {HELLO: 8, CHALLENGE: 8, RESPONSE: 8, RESULT: 1}
ACCEPT_BYTE = b"\x01"
REJECT_BYTE = b"\x00"

DEFAULT_TIMEOUT = 5.0
ENROLL_RETRIES = 64
CSV_HEADER = ["sn", "idx", "x_hex", "y_hex", "consumed"]
MASK64 = (1 << 64) - 1


class Verdict(Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    EXHAUSTED = "exhausted"


@dataclass
class Pair:
    index: int
    x: int
    y: int
    consumed: bool = False


@dataclass
class UirRecord:
    sn: int
    pairs: list[Pair] = field(default_factory=list)

    def unconsumed(self) -> list[Pair]:
        return [p for p in self.pairs if not p.consumed]


# UIR store


class UirStore:
    """Per-device secret records. Single writer: every mutation holds the lock
    and, when the store has a path, is written through before returning."""

    def __init__(self, records=(), path=None):
        self._records: dict[int, UirRecord] = {}
        self._lock = threading.RLock()
        self.path = Path(path) if path is not None else None
        for r in records:
            self._records[r.sn] = r

    def __contains__(self, sn):
        return sn in self._records

    def __len__(self):
        return len(self._records)

    @property
    def serials(self) -> list[int]:
        return sorted(self._records)

    def records(self) -> list[UirRecord]:
        return [self._records[sn] for sn in self.serials]

    def get(self, sn: int) -> UirRecord:
        try:
            return self._records[sn]
        except KeyError:
            raise UnknownSerial(f"no UIR record for serial {sn}") from None

    def add(self, record: UirRecord):
        with self._lock:
            self._records[record.sn] = record
            self._persist()

    def take_pair(self, sn: int, rng) -> Pair | None:
        """Pick a random unconsumed pair, mark it consumed and persist it."""
        with self._lock:
            free = self.get(sn).unconsumed()
            if not free:
                return None
            pair = free[rng.randrange(len(free))]
            pair.consumed = True
            self._persist()
            return pair

    def _persist(self):
        if self.path is not None:
            uir_save(self, self.path)

    def __eq__(self, other):
        return isinstance(other, UirStore) and self.records() == other.records()

    @classmethod
    def open(cls, path) -> "UirStore":
        """Load ``path`` (or start empty if absent) with write-through enabled."""
        path = Path(path)
        store = uir_load(path) if path.exists() else cls()
        store.path = path
        return store


def uir_dumps(store: UirStore) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in store.records():
        for p in rec.pairs:
            w.writerow([rec.sn, p.index, f"{p.x:016x}", f"{p.y:016x}", int(p.consumed)])
    return buf.getvalue()


def uir_save(store: UirStore, path) -> None:
    path = Path(path)
    data = uir_dumps(store)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write UIR store {path}: {exc}") from exc


def _parse_int(text, line, col, base, lo, hi, what):
    try:
        if base == 16 and (len(text) != 16 or text != text.lower()):
            raise ValueError
        v = int(text, base)
    except ValueError:
        raise ParseError(f"bad {what} {text!r}", line, col) from None
    if not lo <= v <= hi:
        raise ParseError(f"{what} {v} out of range", line, col)
    return v


def uir_loads(text: str) -> UirStore:
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)}", 1, 1)
    records: dict[int, UirRecord] = {}
    seen = set()
    for n, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise ParseError(f"expected 5 fields, got {len(row)}", n, len(row) + 1 if len(row) < 5 else 6)
        sn = _parse_int(row[0], n, 1, 10, 0, MASK64, "serial")
        idx = _parse_int(row[1], n, 2, 10, 0, 0xFFFF, "index")
        x = _parse_int(row[2], n, 3, 16, 0, MASK64, "x_hex")
        y = _parse_int(row[3], n, 4, 16, 0, MASK64, "y_hex")
        if row[4] not in ("0", "1"):
            raise ParseError(f"consumed must be 0 or 1, got {row[4]!r}", n, 5)
        if (sn, idx) in seen:
            raise DuplicateIndex(f"index {idx} repeated for serial {sn}", n, 2)
        seen.add((sn, idx))
        records.setdefault(sn, UirRecord(sn)).pairs.append(Pair(idx, x, y, row[4] == "1"))
    for rec in records.values():
        rec.pairs.sort(key=lambda p: p.index)
        if [p.index for p in rec.pairs] != list(range(len(rec.pairs))):
            raise ParseError(f"indices for serial {rec.sn} are not dense from 0")
    return UirStore(records.values())


def uir_load(path) -> UirStore:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read UIR store {path}: {exc}") from exc
    return uir_loads(text)


# enrollment and identification


def device_respond(device, y: int) -> int:
    """The unit's answer to a challenge: SUC_u^-1(y)."""
    if device.kind == "i":
        return device.apply(y)
    return device.decrypt(y)


def enroll(device, sn: int, t: int, rng, max_retries: int = ENROLL_RETRIES) -> UirRecord:
    """Challenge the fresh unit with t distinct random plaintexts."""
    if t < 1 or t > 0x10000:
        raise ValueError("pair count must be in [1, 65536]")
    if not 0 <= sn <= MASK64:
        raise ValueError("serial number is 64-bit")
    xs: list[int] = []
    seen = set()
    for _ in range(t):
        for _ in range(max_retries):
            x = rng.getrandbits(64)
            if x not in seen:
                break
        else:
            raise DuplicateChallengeRetryExceeded(f"{max_retries} duplicate challenges in a row")
        seen.add(x)
        xs.append(x)
    ys = device.encrypt_many(xs)
    return UirRecord(sn, [Pair(i, x, int(y)) for i, (x, y) in enumerate(zip(xs, ys))])


class LocalChannel:
    """In-process channel to a responder (a cipher instance or a callable)."""

    def __init__(self, responder):
        if callable(responder) and not hasattr(responder, "kind"):
            self._respond = responder
        else:
            self._respond = lambda y: device_respond(responder, y)
        self.last_result: bool | None = None

    def challenge(self, y: int) -> int:
        try:
            return int(self._respond(y)) & MASK64
        except Exception as exc:
            raise ChannelFailure(f"responder failed: {exc}") from exc

    def result(self, accepted: bool):
        self.last_result = accepted


def identify(store: UirStore, sn: int, channel, rng=None) -> Verdict:
    """Challenge unit ``sn`` with one unused pair.

    The pair is consumed and persisted before the challenge leaves, so it is
    burnt whatever happens afterwards (reject, timeout, broken channel).
    """
    rng = rng if rng is not None else random.SystemRandom()
    pair = store.take_pair(sn, rng)
    if pair is None:
        return Verdict.EXHAUSTED
    answer = channel.challenge(pair.y)
    ok = answer == pair.x
    channel.result(ok)
    return Verdict.ACCEPTED if ok else Verdict.REJECTED


# frames


def encode_frame(ftype: int, payload: bytes) -> bytes:
    return struct.pack("<BH", ftype, len(payload)) + payload


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except socket.timeout:
            raise ProtocolTimeout("peer did not answer in time") from None
        except OSError as exc:
            raise ChannelFailure(str(exc)) from exc
        if not chunk:
            raise ChannelFailure("connection closed mid-frame")
        buf += chunk
    return bytes(buf)


def recv_frame(sock, expect: int) -> bytes:
    ftype, length = struct.unpack("<BH", _recv_exact(sock, 3))
    if ftype not in PAYLOAD_LEN:
        raise ProtocolViolation(f"unknown frame type {ftype:#04x}")
    payload = _recv_exact(sock, length)
    if ftype != expect:
        raise ProtocolViolation(f"expected frame {expect:#04x}, got {ftype:#04x}")
    if length != PAYLOAD_LEN[ftype]:
        raise ProtocolViolation(f"frame {ftype:#04x} has length {length}, expected {PAYLOAD_LEN[ftype]}")
    return payload


def send_frame(sock, ftype: int, payload: bytes):
    try:
        sock.sendall(encode_frame(ftype, payload))
    except socket.timeout:
        raise ProtocolTimeout("send timed out") from None
    except OSError as exc:
        raise ChannelFailure(str(exc)) from exc


def _u64(payload: bytes) -> int:
    return int.from_bytes(payload, "little")


def _p64(v: int) -> bytes:
    return int(v).to_bytes(8, "little")


class FrameChannel:
    """TA side of one framed session over a connected socket."""

    def __init__(self, sock):
        self.sock = sock

    def hello(self) -> int:
        return _u64(recv_frame(self.sock, HELLO))

    def challenge(self, y: int) -> int:
        send_frame(self.sock, CHALLENGE, _p64(y))
        return _u64(recv_frame(self.sock, RESPONSE))

    def result(self, accepted: bool):
        send_frame(self.sock, RESULT, ACCEPT_BYTE if accepted else REJECT_BYTE)


def ta_session(sock, store: UirStore, rng, expect_sn: int | None = None) -> tuple[int, Verdict]:
    """Run the TA half of a session on a connected socket."""
    ch = FrameChannel(sock)
    sn = ch.hello()
    if expect_sn is not None and sn != expect_sn:
        raise ProtocolViolation(f"device announced serial {sn}, expected {expect_sn}")
    if sn not in store:
        ch.result(False)
        raise UnknownSerial(f"no UIR record for serial {sn}")
    verdict = identify(store, sn, ch, rng)
    if verdict is Verdict.EXHAUSTED:
        ch.result(False)
    return sn, verdict


def device_session(sock, device, sn: int, responder=None) -> Verdict:
    """Run the device half: HELLO, answer the challenge, read the verdict."""
    respond = responder if responder is not None else (lambda y: device_respond(device, y))
    send_frame(sock, HELLO, _p64(sn))
    ftype, length = struct.unpack("<BH", _recv_exact(sock, 3))
    payload = _recv_exact(sock, length)
    if ftype == RESULT and length == 1:
        # TA had nothing to ask (unknown serial or exhausted record)
        return Verdict.REJECTED
    if ftype != CHALLENGE or length != 8:
        raise ProtocolViolation(f"expected challenge frame, got type {ftype:#04x} length {length}")
    send_frame(sock, RESPONSE, _p64(respond(_u64(payload))))
    return Verdict.ACCEPTED if recv_frame(sock, RESULT) == ACCEPT_BYTE else Verdict.REJECTED


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _connect(address, timeout):
    try:
        sock = socket.create_connection(address, timeout=timeout)
    except socket.timeout:
        raise ProtocolTimeout(f"connecting to {address} timed out") from None
    except OSError as exc:
        raise ChannelFailure(f"cannot connect to {address}: {exc}") from exc
    sock.settimeout(timeout)
    return sock


def connect_device(bitstream, address, sn: int, timeout: float = DEFAULT_TIMEOUT, responder=None) -> Verdict:
    """Device role as a client: connect to a TA and get identified."""
    from .genie import VirtualBitstream, load_device

    device = load_device(bitstream) if isinstance(bitstream, VirtualBitstream) else bitstream
    with _connect(address, timeout) as sock:
        return device_session(sock, device, sn, responder)


def identify_remote(store: UirStore, sn: int, address, rng=None, timeout: float = DEFAULT_TIMEOUT) -> Verdict:
    """TA role as a client: connect to a listening device and identify it."""
    rng = rng if rng is not None else random.SystemRandom()
    with _connect(address, timeout) as sock:
        return ta_session(sock, store, rng, expect_sn=sn)[1]


# servers


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, handler, timeout, max_sessions):
        self.session_timeout = timeout
        self.max_sessions = max_sessions
        self.sessions = 0
        self.outcomes: list = []
        self._count_lock = threading.Lock()
        self.done = threading.Event()
        try:
            super().__init__(address, handler)
        except OSError as exc:
            raise BindFailure(f"cannot listen on {address}: {exc}") from exc

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def record(self, outcome):
        with self._count_lock:
            self.outcomes.append(outcome)
            self.sessions += 1
            if self.max_sessions is not None and self.sessions >= self.max_sessions:
                self.done.set()
                threading.Thread(target=self.shutdown, daemon=True).start()


class _TaHandler(socketserver.BaseRequestHandler):
    def handle(self):
        srv = self.server
        self.request.settimeout(srv.session_timeout)
        try:
            outcome = ta_session(self.request, srv.store, srv.rng)
        except Exception as exc:  # one bad session must not stop the server
            log.warning("session from %s failed: %s", self.client_address, exc)
            outcome = exc
        srv.record(outcome)


class _DeviceHandler(socketserver.BaseRequestHandler):
    def handle(self):
        srv = self.server
        self.request.settimeout(srv.session_timeout)
        try:
            outcome = device_session(self.request, srv.device, srv.sn)
        except Exception as exc:
            log.warning("session from %s failed: %s", self.client_address, exc)
            outcome = exc
        srv.record(outcome)


def make_ta_server(store: UirStore, address, rng=None, timeout: float = DEFAULT_TIMEOUT, max_sessions=None):
    """Bound TA server; call ``serve_forever`` (or run it in a thread)."""
    srv = _Server(address, _TaHandler, timeout, max_sessions)
    srv.store = store
    # one rng shared by all sessions; draws happen under the store lock
    srv.rng = rng if rng is not None else random.SystemRandom()
    return srv


def serve_ta(store: UirStore, address, rng=None, timeout: float = DEFAULT_TIMEOUT, max_sessions=None):
    with make_ta_server(store, address, rng, timeout, max_sessions) as srv:
        srv.serve_forever()
        return srv.outcomes


def make_device_server(device, sn: int, address, timeout: float = DEFAULT_TIMEOUT, max_sessions=None):
    srv = _Server(address, _DeviceHandler, timeout, max_sessions)
    srv.device = device
    srv.sn = sn
    return srv
