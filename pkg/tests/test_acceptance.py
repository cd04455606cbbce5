"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL line that is printed in the terminal summary
(and directly when this file is run as a script).
"""
import os
import random
import threading
from fractions import Fraction

import numpy as np
import pytest

import conftest
from oracles import batch_is_optimal_involution, log2_factorial
from sucsim import analysis, genie, protocol
from sucsim.cipher_i import check_commutation, diffuse, nibble_sum
from sucsim.cipher_ni import PERMUTATION
from sucsim.protocol import Verdict
from sucsim.trng import Trng

WORKERS = min(8, os.cpu_count() or 1)


def report(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def seeds(tag, n):
    return [bytes([tag]) * 24 + i.to_bytes(8, "little") for i in range(n)]


def test_c01_census(library):
    tables = (library.packed[:, None] >> (4 * (15 - np.arange(16, dtype=np.uint64)))) & np.uint64(0xF)
    members_ok = bool(batch_is_optimal_involution(tables.astype(np.int64)).all())
    count = len(library)
    report(1, count == 145_920 and members_ok,
           f"count={count} (expected 145920), all members optimal involutions={members_ok}")


def test_c02_entropy_ledger():
    totals = {}
    for kind in ("i", "ni"):
        _, ledger = genie.personalize(genie.build_template(b"", kind), Trng(b"\x02" * 32))
        totals[kind] = ledger.total_bytes
    cost = genie.genie_storage_cost(145_920, 64)
    ok = totals == {"i": 156, "ni": 170} and cost == Fraction("8.90625")
    report(2, ok, f"I={totals['i']} B, NI={totals['ni']} B, C_SM={float(cost)} Mbit")


def test_c03_involution_law(library):
    failures = 0
    gen = np.random.default_rng(3)
    for seed in seeds(3, 100):
        spec = genie.sample_instance("i", Trng(seed), library)
        xs = gen.integers(0, 1 << 64, size=100_000, dtype=np.uint64)
        failures += int((spec.apply_many(spec.apply_many(xs)) != xs).sum())
    report(3, failures == 0, f"100 instances x 1e5 inputs, failures={failures}")


def test_c04_round_trip_law(library):
    failures = 0
    gen = np.random.default_rng(4)
    for seed in seeds(4, 100):
        spec = genie.sample_instance("ni", Trng(seed), library)
        xs = gen.integers(0, 1 << 64, size=10_000, dtype=np.uint64)
        failures += int((spec.decrypt_many(spec.encrypt_many(xs)) != xs).sum())
    report(4, failures == 0, f"100 instances x 1e4 inputs, failures={failures}")


def test_c05_diffusion_theorem(library):
    r = random.Random(5)
    xs = [r.getrandbits(64) for _ in range(100_000)]
    inv_fail = sum(diffuse(diffuse(x)) != x for x in xs)
    comm_fail = 0
    keys = 0
    for seed in seeds(5, 1000):
        spec = genie.sample_instance("i", Trng(seed), library)
        for k in spec.stored_keys:
            keys += 1
            if not check_commutation(k, r).holds:
                comm_fail += 1
        if keys >= 10_000:
            break
    neg_fail = 0
    for _ in range(1000):
        k = r.getrandbits(64)
        if nibble_sum(k) == 0:
            k ^= 1
        res = check_commutation(k, r)
        x = res.counterexample
        if res.holds or x is None or diffuse(x ^ k) == diffuse(x) ^ k:
            neg_fail += 1
    ok = inv_fail == 0 and comm_fail == 0 and neg_fail == 0 and keys >= 10_000
    report(5, ok, f"involution fails={inv_fail}, {keys} schedule keys commute fails={comm_fail}, "
                  f"1000 bad keys without counterexample={neg_fail}")


def test_c06_table_one():
    bijective = sorted(PERMUTATION) == list(range(64))
    spread = all(len({PERMUTATION[4 * k + j] // 4 for j in range(4)}) == 4 for k in range(16))
    report(6, bijective and spread, f"bijection={bijective}, 4 distinct targets per S-box={spread}")


def test_c07_avalanche(library):
    res = {}
    for kind, start in (("i", 3), ("ni", 7)):
        rep = analysis.avalanche_by_round(kind, 1, 1000, random.Random(7), library=library)
        bad = [r.round for r in rep.rounds if r.round >= start and not 30 <= r.mean <= 34]
        res[kind] = (bad, rep.saturation_round())
    ok = not res["i"][0] and not res["ni"][0]
    report(7, ok, f"I saturates at round {res['i'][1]} (need <=3), NI at round {res['ni'][1]} (need <=7), "
                  f"out-of-band rounds I={res['i'][0]} NI={res['ni'][0]}")


def test_c08_class_avalanche(tmp_path_factory):
    out = tmp_path_factory.mktemp("class_avalanche")
    parts, ok = [], True
    for kind in ("i", "ni"):
        rep = analysis.class_avalanche(kind, 1000, 100, random.Random(8), workers=WORKERS)
        analysis.emit_csv(rep, out / f"class_{kind}.csv")
        cmp = rep.comparison()
        ok &= rep.means_within((30, 34)) and len(rep.instances) == 1000
        parts.append(f"{kind}: means in [30,34]={rep.means_within()}, per-pair envelope {cmp['measured_envelope']}, "
                     f"per-flip-mean envelope {cmp['flip_mean_envelope']} vs reported {cmp['paper_envelope']}")
    report(8, ok, "; ".join(parts) + f"; csv in {out}")


def test_c09_active_sboxes():
    i_d = analysis.min_active_sboxes("i", "differential")
    i_l = analysis.min_active_sboxes("i", "linear")
    ni_d = analysis.min_active_sboxes("ni", "differential")
    ok = i_d.minimum == 4 and i_l.minimum >= 2 and ni_d.minimum >= 3
    report(9, ok, f"I diff={i_d.minimum} (need 4), I lin={i_l.minimum} (need >=2), NI diff={ni_d.minimum} "
                  f"(need >=3, claimed {ni_d.claimed}; single-bit-input minimum "
                  f"{ni_d.notes['single_bit_input_minimum']}, witness {ni_d.witness})")


def test_c10_bound_calculators():
    checks = {
        "N_L,N_D @R=30": analysis.data_complexity_bounds(30) == (120, 120),
        "NI 326/1350": abs(analysis.cardinalities("ni").class_size_log2 - 326) <= 1
        and abs(analysis.cardinalities("ni").cre_total - 1350) <= 1,
        "I 274/1234": abs(analysis.cardinalities("i").class_size_log2 - 274) <= 1
        and abs(analysis.cardinalities("i").cre_total - 1234) <= 1,
        "upper 11142": round(analysis.cardinalities("ni", analysis.upper_bound_layers("ni")).cre_total) == 11142,
        "upper 5350": round(analysis.cardinalities("i", analysis.upper_bound_layers("i")).cre_total) == 5350,
        "grover 137": round(analysis.modeling_and_quantum(64, "i").grover_log2) == 137,
        "grover 163": round(analysis.modeling_and_quantum(64, "ni").grover_log2) == 163,
        "stirling 8192": analysis.perfect_bounds(10).s_max_log2_stirling == 8192,
        "exact 8769": round(analysis.perfect_bounds(10).s_max_log2_exact) == 8769 == round(log2_factorial(1024)),
    }
    bad = [k for k, v in checks.items() if not v]
    report(10, not bad, f"{len(checks) - len(bad)}/{len(checks)} calculator checks" + (f", failed {bad}" if bad else ""))


def test_c11_genie_isolation():
    outside = mismatches = 0
    locked_ok = True
    gen = np.random.default_rng(11)
    for kind in ("i", "ni"):
        for seed in seeds(11 if kind == "i" else 12, 5):
            tpl = genie.build_template(gen.bytes(4096), kind)
            bs, _ = genie.personalize(tpl, Trng(seed))
            a = np.frombuffer(tpl.to_bytes(), np.uint8)
            b = np.frombuffer(bs.to_bytes(), np.uint8)
            inside = np.zeros(len(a), bool)
            for lo, hi in bs.template_spans() + [(6, 7)]:  # plus the flags byte
                inside[lo:hi] = True
            outside += int(((a != b) & ~inside).sum())
            direct = genie.sample_instance(kind, Trng(seed))
            xs = gen.integers(0, 1 << 64, size=1000, dtype=np.uint64)
            mismatches += int((genie.load_device(bs).encrypt_many(xs) != direct.encrypt_many(xs)).sum())
            try:
                genie.personalize(genie.lock(bs), Trng(seed))
                locked_ok = False
            except genie.AlreadyLocked:
                pass
    ok = outside == 0 and mismatches == 0 and locked_ok
    report(11, ok, f"bytes changed outside templates={outside}, load vs direct mismatches={mismatches}, "
                   f"personalize after lock refused={locked_ok}")


def test_c12_protocol(library, tmp_path):
    dev = genie.sample_instance("ni", Trng(b"\x12" * 32), library)
    store = protocol.UirStore([protocol.enroll(dev, 1, 2100, random.Random(12))], path=tmp_path / "uir.csv")
    rng = random.Random(13)
    issued = []

    class Recorder(protocol.LocalChannel):
        def challenge(self, y):
            issued.append(y)
            return super().challenge(y)

    local_auth = protocol.identify(store, 1, Recorder(dev), rng) is Verdict.ACCEPTED
    bogus = random.Random(14)
    local_rand_acc = sum(
        protocol.identify(store, 1, Recorder(lambda y: bogus.getrandbits(64)), rng) is Verdict.ACCEPTED
        for _ in range(1000)
    )

    srv = protocol.make_ta_server(store, ("127.0.0.1", 0), rng, timeout=5.0, max_sessions=1002)
    th = threading.Thread(target=srv.serve_forever, daemon=True)
    th.start()
    tcp_auth = protocol.connect_device(dev, srv.address, 1) is Verdict.ACCEPTED
    tcp_rand_acc = 0
    results = []

    def worker(k):
        out = [protocol.connect_device(dev, srv.address, 1, 5.0, lambda y: bogus.getrandbits(64)) for _ in range(k)]
        results.extend(out)

    threads = [threading.Thread(target=worker, args=(250,)) for _ in range(4)]  # interleaved sessions
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    tcp_rand_acc = sum(v is Verdict.ACCEPTED for v in results)
    tcp_auth2 = protocol.connect_device(dev, srv.address, 1) is Verdict.ACCEPTED
    th.join(10)
    srv.server_close()

    consumed = [p for p in store.get(1).pairs if p.consumed]
    no_reuse = len(consumed) == 1001 + 1002 and len(set(issued)) == len(issued) == 1001
    reloaded = protocol.uir_load(tmp_path / "uir.csv")
    protocol.uir_save(reloaded, tmp_path / "copy.csv")
    lossless = reloaded == store and (tmp_path / "copy.csv").read_bytes() == (tmp_path / "uir.csv").read_bytes()
    ok = (local_auth and tcp_auth and tcp_auth2 and local_rand_acc == 0 and tcp_rand_acc == 0
          and len(results) == 1000 and no_reuse and lossless)
    report(12, ok, f"authentic accepted local={local_auth} tcp={tcp_auth and tcp_auth2}; random responder "
                   f"accepted local={local_rand_acc}/1000 tcp={tcp_rand_acc}/{len(results)}; "
                   f"pairs consumed once={no_reuse}; CSV lossless={lossless}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
