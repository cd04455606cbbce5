"""Command-line entry point.

Exit codes: 0 success / accepted, 1 rejected, 2 usage, 3 data or format
error, 4 network error.
"""
from __future__ import annotations

import argparse
import logging
import random
import sys
from pathlib import Path

from . import analysis, genie, protocol
from .errors import SucError
from .sbox import (
    SBox4,
    differential_uniformity,
    enumerate_involutive_optimal,
    has_single_bit_diffusion,
    is_involution,
    is_optimal,
    linearity,
)
from .trng import SEED_BYTES, Trng

EXIT_OK, EXIT_REJECTED, EXIT_USAGE, EXIT_DATA, EXIT_NETWORK = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def seed_arg(text: str) -> bytes:
    try:
        seed = bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be hex") from None
    if len(seed) != SEED_BYTES:
        raise argparse.ArgumentTypeError(f"seed must be {2 * SEED_BYTES} hex characters")
    return seed


def sn_arg(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("serial number must fit in 64 bits")
    return v


def addr_arg(text: str):
    try:
        return protocol.parse_address(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _rng(args):
    """Deterministic Trng when --seed is given, OS randomness otherwise."""
    seed = getattr(args, "seed", None)
    return Trng(seed) if seed is not None else random.SystemRandom()


def _say(*lines):
    for line in lines:
        print(line)


# subcommands


def cmd_forge(args):
    payload = args.payload.read_bytes() if args.payload else b""
    bs = genie.build_template(payload, args.kind)
    genie.write_bitstream(bs, args.out)
    _say(f"kind={args.kind}", f"bytes={len(bs.to_bytes())}")
    return EXIT_OK


def cmd_personalize(args):
    bs = genie.read_bitstream(args.inp)
    if args.entropy == "os":
        trng = Trng.from_os()
    elif args.seed is not None:
        trng = Trng(args.seed)
    else:
        raise UsageError("personalize needs --seed or --entropy os")
    out, ledger = genie.personalize(bs, trng)
    if args.lock:
        out = genie.lock(out, trng)
    genie.write_bitstream(out, args.out)
    _say(*ledger.lines())
    return EXIT_OK


def cmd_lock(args):
    bs = genie.lock(genie.read_bitstream(args.inp))
    genie.write_bitstream(bs, args.out or args.inp)
    _say("locked=1")
    return EXIT_OK


def cmd_inspect(args):
    bs = genie.read_bitstream(args.inp)
    _say(
        f"version={bs.version}",
        f"kind={bs.cipher_kind}",
        f"personalized={int(bs.personalized)}",
        f"locked={int(bs.locked)}",
        f"templates={len(bs.entries)}",
    )
    for e in bs.entries:
        _say(f"template id={e.template_id} kind={e.kind.name} offset={e.offset} length={e.length}")
    if not bs.personalized:
        return EXIT_OK
    spec = genie.load_device(bs)  # re-checks every S-box
    for i, s in enumerate(spec.sboxes):
        _say(
            f"sbox {i} {s.hex()} optimal={int(is_optimal(s))} involution={int(is_involution(s))} "
            f"single_bit_diffusion={int(has_single_bit_diffusion(s))}"
        )
    _say("sboxes_ok=1")
    return EXIT_OK


def cmd_enroll(args):
    device = genie.load_device(genie.read_bitstream(args.device))
    store = protocol.UirStore.open(args.uir)
    record = protocol.enroll(device, args.sn, args.pairs, _rng(args))
    store.add(record)
    _say(f"sn={args.sn}", f"pairs={len(record.pairs)}")
    return EXIT_OK


def cmd_identify(args):
    store = protocol.UirStore.open(args.uir)
    if args.connect:
        verdict = protocol.identify_remote(store, args.sn, args.connect, _rng(args), args.timeout)
    else:
        device = genie.load_device(genie.read_bitstream(args.device))
        verdict = protocol.identify(store, args.sn, protocol.LocalChannel(device), _rng(args))
    _say(f"verdict={verdict.value}")
    if verdict is protocol.Verdict.EXHAUSTED:
        print(f"error: no unconsumed pairs left for serial {args.sn}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK if verdict is protocol.Verdict.ACCEPTED else EXIT_REJECTED


def cmd_serve_ta(args):
    store = protocol.UirStore.open(args.uir)
    srv = protocol.make_ta_server(store, args.listen, _rng(args), args.timeout, args.sessions)
    with srv:
        host, port = srv.address
        print(f"listening={host}:{port}", flush=True)
        try:
            srv.serve_forever()
        except KeyboardInterrupt:
            pass
    for outcome in srv.outcomes:
        if isinstance(outcome, Exception):
            _say(f"session error={outcome}")
        else:
            _say(f"session sn={outcome[0]} verdict={outcome[1].value}")
    return EXIT_OK


def cmd_device(args):
    bs = genie.read_bitstream(args.bitstream)
    if args.listen:
        device = genie.load_device(bs)
        srv = protocol.make_device_server(device, args.sn, args.listen, args.timeout, args.sessions)
        with srv:
            host, port = srv.address
            print(f"listening={host}:{port}", flush=True)
            try:
                srv.serve_forever()
            except KeyboardInterrupt:
                pass
        return EXIT_OK
    verdict = protocol.connect_device(bs, args.connect, args.sn, args.timeout)
    _say(f"verdict={verdict.value}")
    return EXIT_OK if verdict is protocol.Verdict.ACCEPTED else EXIT_REJECTED


def cmd_analyze(args):
    rng = _rng(args)
    if args.what == "avalanche":
        rep = analysis.avalanche_by_round(args.kind, args.instances, args.inputs, rng, flip=not args.no_flip)
        for r in rep.rounds:
            _say(f"round={r.round} mean={r.mean:.3f} min={r.min} max={r.max}")
        _say(f"saturation_round={rep.saturation_round()}")
    elif args.what == "class":
        rep = analysis.class_avalanche(args.kind, args.instances, args.msgs, rng, args.workers)
        _say(*(f"{k}={v}" for k, v in rep.comparison().items()))
        _say(f"means_within_30_34={int(rep.means_within())}")
    elif args.what == "bounds":
        census = len(enumerate_involutive_optimal()) if args.census else None
        _say(*analysis.bounds_report(census))
        return EXIT_OK
    else:
        attacks = [args.attack] if args.attack else (["differential", "linear"] if args.kind == "i" else ["differential"])
        for attack in attacks:
            res = analysis.min_active_sboxes(args.kind, attack)
            _say(f"kind={res.kind} attack={attack} minimum={res.minimum} claimed={res.claimed} witness={res.witness}")
            for k, v in res.notes.items():
                _say(f"{k}={v}")
        return EXIT_OK
    if args.csv:
        analysis.emit_csv(rep, args.csv)
    return EXIT_OK


def cmd_sbox(args):
    if args.what == "enumerate-involutive":
        lib = enumerate_involutive_optimal(args.cache)
        bad = sum(1 for i in range(0, len(lib), max(1, len(lib) // 1000)) if not (is_optimal(lib[i]) and is_involution(lib[i])))
        _say(f"count={len(lib)}")
        if args.out:
            args.out.write_bytes(lib.to_bytes())
        return EXIT_DATA if bad else EXIT_OK
    for text in args.sboxes:
        s = SBox4.from_hex(text)
        _say(
            f"sbox={s.hex()} optimal={int(is_optimal(s))} involution={int(is_involution(s))} "
            f"lin={linearity(s)} diff={differential_uniformity(s)} "
            f"single_bit_diffusion={int(has_single_bit_diffusion(s)) if len(set(s.table)) == 16 else 0}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sucsim", description="Secret unknown cipher simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("forge", help="build a template bitstream")
    s.add_argument("--kind", choices=genie.KINDS, required=True)
    s.add_argument("--payload", type=Path)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_forge)

    s = sub.add_parser("personalize", help="run the GENIE on a template")
    s.add_argument("--in", dest="inp", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--seed", type=seed_arg)
    s.add_argument("--entropy", choices=["os"])
    s.add_argument("--kind", choices=genie.KINDS, help="optional check against the template kind")
    s.add_argument("--lock", action="store_true", help="lock right away and wipe the TRNG")
    s.set_defaults(func=cmd_personalize)

    s = sub.add_parser("lock", help="set the one-way reconfiguration lock")
    s.add_argument("--in", dest="inp", type=Path, required=True)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_lock)

    s = sub.add_parser("inspect", help="show directory, kind and S-box checks")
    s.add_argument("--in", dest="inp", type=Path, required=True)
    s.set_defaults(func=cmd_inspect)

    s = sub.add_parser("enroll", help="store challenge/response pairs for a device")
    s.add_argument("--device", type=Path, required=True)
    s.add_argument("--sn", type=sn_arg, required=True)
    s.add_argument("--pairs", type=int, required=True)
    s.add_argument("--uir", type=Path, required=True)
    s.add_argument("--seed", type=seed_arg)
    s.set_defaults(func=cmd_enroll)

    s = sub.add_parser("identify", help="identify a device with one stored pair")
    s.add_argument("--uir", type=Path, required=True)
    s.add_argument("--sn", type=sn_arg, required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--device", type=Path)
    g.add_argument("--connect", type=addr_arg)
    s.add_argument("--seed", type=seed_arg)
    s.add_argument("--timeout", type=float, default=protocol.DEFAULT_TIMEOUT)
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("serve-ta", help="TA server, one identification per connection")
    s.add_argument("--uir", type=Path, required=True)
    s.add_argument("--listen", type=addr_arg, required=True)
    s.add_argument("--sessions", type=int, help="stop after this many sessions")
    s.add_argument("--seed", type=seed_arg)
    s.add_argument("--timeout", type=float, default=protocol.DEFAULT_TIMEOUT)
    s.set_defaults(func=cmd_serve_ta)

    s = sub.add_parser("device", help="run a personalized device against a TA")
    s.add_argument("--bitstream", type=Path, required=True)
    s.add_argument("--sn", type=sn_arg, required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--connect", type=addr_arg)
    g.add_argument("--listen", type=addr_arg)
    s.add_argument("--sessions", type=int)
    s.add_argument("--timeout", type=float, default=protocol.DEFAULT_TIMEOUT)
    s.set_defaults(func=cmd_device)

    s = sub.add_parser("analyze", help="avalanche, class, bounds, active-sboxes")
    s.add_argument("what", choices=["avalanche", "class", "bounds", "active-sboxes"])
    s.add_argument("--kind", choices=genie.KINDS, default="i")
    s.add_argument("--instances", type=int)
    s.add_argument("--inputs", type=int, default=1000)
    s.add_argument("--msgs", type=int, default=100)
    s.add_argument("--workers", type=int)
    s.add_argument("--no-flip", action="store_true", help="zero-flip control run")
    s.add_argument("--attack", choices=["differential", "linear"])
    s.add_argument("--census", action="store_true", help="add census-derived entries to the bounds")
    s.add_argument("--seed", type=seed_arg)
    s.add_argument("--csv", type=Path)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sbox", help="S-box census and checks")
    s.add_argument("what", choices=["enumerate-involutive", "check"])
    s.add_argument("sboxes", nargs="*", help="16-hex-digit tables, S(0) first")
    s.add_argument("--cache", type=Path)
    s.add_argument("--out", type=Path, help="also write the census in SBX1 format")
    s.set_defaults(func=cmd_sbox)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "analyze" and args.instances is None:
        args.instances = 1000 if args.what == "class" else 1
    if args.command == "sbox" and args.what == "check" and not args.sboxes:
        print("error: sbox check needs at least one table", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "personalize" and args.kind:
            kind = genie.read_bitstream(args.inp).cipher_kind
            if kind != args.kind:
                raise UsageError(f"template kind is {kind}, not {args.kind}")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SucError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())
