"""Avalanche experiments, two-round active S-box searches and the counting /
bound calculators, with CSV and key=value output."""
from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .cipher_ni import PERMUTATION
from .cipher_ni import ROUNDS as NI_ROUNDS
from .errors import ExactTermUnavailable, IoFailure
from .genie import KEY_BITS, NOMINAL_OPTIMAL_CLASS_LOG2, sample_instance
from .sbox import diff_table, enumerate_involutive_optimal
from .spn import hamming
from .trng import Trng

# log2 of the S-box sets as rounded in the literature: 2^20.4 optimal S-boxes,
# 2^17.15 for the involutive choice
SBOX_SET_LOG2 = {"ni": NOMINAL_OPTIMAL_CLASS_LOG2, "i": Fraction(1715, 100)}
FULL_ROUNDS = {"ni": NI_ROUNDS, "i": 31}  # keyed rounds
SATURATION = (30, 34)
PAPER_CLASS_ENVELOPE = {"i": (28, 35), "ni": (22, 31)}
CLAIMED_ACTIVE = {("i", "differential"): 4, ("i", "linear"): 2, ("ni", "differential"): 4, ("ni", "linear"): 4}
PSI_CLASSICAL = 80
PSI_POSTQUANTUM = 160
EXACT_FACTORIAL_MAX_N = 24


def _instance_trng(rng) -> Trng:
    return Trng(rng.getrandbits(256).to_bytes(32, "little"))


def _np_rng(rng) -> np.random.Generator:
    return np.random.default_rng(rng.getrandbits(128))


def _flipped(xs, gen, flip: bool):
    if not flip:
        return xs.copy()
    bits = gen.integers(0, 64, size=xs.shape, dtype=np.uint64)
    return xs ^ (np.uint64(1) << bits)


# avalanche


@dataclass(frozen=True)
class RoundStat:
    round: int
    mean: float
    min: int
    max: int


@dataclass(frozen=True)
class AvalancheReport:
    kind: str
    n_instances: int
    n_trials: int
    rounds: tuple[RoundStat, ...]

    columns = ("round", "mean", "min", "max")

    def rows(self):
        return [(r.round, f"{r.mean:.6f}", r.min, r.max) for r in self.rounds]

    def saturation_round(self, band=SATURATION) -> int | None:
        """First round from which every mean stays inside ``band``."""
        lo, hi = band
        first = None
        for r in self.rounds:
            if lo <= r.mean <= hi:
                first = r.round if first is None else first
            else:
                first = None
        return first


def avalanche_by_round(kind: str, n_instances: int = 1, n_inputs: int = 1000, rng=None,
                       flip: bool = True, library=None) -> AvalancheReport:
    """Per-round Hamming distance after flipping one random input bit.

    Each instance is freshly GENIE-sampled. ``flip=False`` is the zero-flip
    control.
    """
    if n_instances < 1 or n_inputs < 1:
        raise ValueError("counts must be positive")
    rng = rng if rng is not None else _default_rng()
    dists = []
    for _ in range(n_instances):
        spec = sample_instance(kind, _instance_trng(rng), library)
        gen = _np_rng(rng)
        xs = gen.integers(0, 1 << 64, size=n_inputs, dtype=np.uint64)
        xs2 = _flipped(xs, gen, flip)
        dists.append(hamming(spec.round_states(xs), spec.round_states(xs2)))
    d = np.concatenate(dists)  # (trials, rounds)
    stats = tuple(
        RoundStat(r + 1, float(d[:, r].mean()), int(d[:, r].min()), int(d[:, r].max()))
        for r in range(d.shape[1])
    )
    return AvalancheReport(kind, n_instances, n_instances * n_inputs, stats)


@dataclass(frozen=True)
class InstanceStat:
    instance: int
    min: int
    max: int
    mean: float
    flip_mean_min: float  # envelope of the 64 per-flip-bit means
    flip_mean_max: float


@dataclass(frozen=True)
class ClassAvalancheReport:
    kind: str
    n_msgs: int
    instances: tuple[InstanceStat, ...]

    columns = ("instance", "min", "max", "mean", "flip_mean_min", "flip_mean_max")

    def rows(self):
        return [
            (s.instance, s.min, s.max, f"{s.mean:.6f}", f"{s.flip_mean_min:.6f}", f"{s.flip_mean_max:.6f}")
            for s in self.instances
        ]

    def envelope(self) -> tuple[int, int]:
        return min(s.min for s in self.instances), max(s.max for s in self.instances)

    def flip_mean_envelope(self) -> tuple[float, float]:
        return (min(s.flip_mean_min for s in self.instances),
                max(s.flip_mean_max for s in self.instances))

    def means_within(self, band=SATURATION) -> bool:
        return all(band[0] <= s.mean <= band[1] for s in self.instances)

    def comparison(self) -> dict[str, object]:
        lo, hi = PAPER_CLASS_ENVELOPE[self.kind]
        env = self.envelope()
        fenv = self.flip_mean_envelope()
        return {
            "kind": self.kind,
            "instances": len(self.instances),
            "paper_envelope": f"{lo}..{hi}",
            "measured_envelope": f"{env[0]}..{env[1]}",
            "flip_mean_envelope": f"{fenv[0]:.3f}..{fenv[1]:.3f}",
            "flip_means_inside_paper_envelope": lo <= fenv[0] and fenv[1] <= hi,
            "mean_of_means": f"{np.mean([s.mean for s in self.instances]):.4f}",
        }


def _class_instance(args) -> InstanceStat:
    idx, kind, seed, n_msgs = args
    trng = Trng(seed)
    spec = sample_instance(kind, trng)
    gen = np.random.default_rng(int.from_bytes(seed[:16], "little"))
    xs = gen.integers(0, 1 << 64, size=n_msgs, dtype=np.uint64)
    y = spec.encrypt_many(xs)
    d = np.empty((64, n_msgs), dtype=np.int64)
    for b in range(64):
        d[b] = hamming(y, spec.encrypt_many(xs ^ (np.uint64(1) << np.uint64(b))))
    fm = d.mean(axis=1)
    return InstanceStat(idx, int(d.min()), int(d.max()), float(d.mean()), float(fm.min()), float(fm.max()))


def class_avalanche(kind: str, n_instances: int = 1000, n_msgs: int = 100, rng=None,
                    workers: int | None = None) -> ClassAvalancheReport:
    """Full-cipher distance over n_msgs messages x all 64 single-bit flips,
    per instance. Results do not depend on ``workers``."""
    if n_instances < 1 or n_msgs < 1:
        raise ValueError("counts must be positive")
    rng = rng if rng is not None else _default_rng()
    jobs = [(i, kind, rng.getrandbits(256).to_bytes(32, "little"), n_msgs) for i in range(n_instances)]
    if workers and workers > 1:
        enumerate_involutive_optimal()  # make sure the cache file exists before forking
        with ProcessPoolExecutor(workers) as pool:
            stats = list(pool.map(_class_instance, jobs, chunksize=max(1, n_instances // (4 * workers))))
    else:
        stats = [_class_instance(j) for j in jobs]
    return ClassAvalancheReport(kind, n_msgs, tuple(stats))


def _default_rng():
    import random

    return random.Random()


# active S-boxes over two rounds


@dataclass(frozen=True)
class ActiveSboxResult:
    kind: str
    attack: str
    minimum: int
    witness: tuple
    claimed: int
    notes: dict = field(default_factory=dict)


def _i_two_round_min():
    """min over nonzero nibble patterns d of wt(d) + wt(diffuse(d)).

    diffuse(d) = d ^ s with s the XOR of all nibbles, so fix s and run a DP
    over positions; the state is (running XOR, any nonzero nibble yet) and a
    position costs [v != 0] + [v != s].
    """
    best = (math.inf, None)
    for s in range(16):
        cost = {(0, False): 0}
        back = []
        for _ in range(16):
            new, choice = {}, {}
            for (acc, nz), c0 in cost.items():
                for v in range(16):
                    key = (acc ^ v, nz or v != 0)
                    c = c0 + (v != 0) + (v != s)
                    if c < new.get(key, math.inf):
                        new[key] = c
                        choice[key] = ((acc, nz), v)
            back.append(choice)
            cost = new
        final = (s, True)
        if cost.get(final, math.inf) < best[0]:
            pattern, key = [], final
            for choice in reversed(back):
                key, v = choice[key]
                pattern.append(v)
            best = (cost[final], tuple(reversed(pattern)))
    return best


def realizable_supports(sboxes, single_bit_input: bool = False) -> set[int]:
    """Output difference supports some S-box in ``sboxes`` can produce from a
    nonzero input difference (weight-1 inputs only if ``single_bit_input``)."""
    out = set()
    for s in sboxes:
        ddt = diff_table(s)
        for a in range(1, 16):
            if single_bit_input and a.bit_count() != 1:
                continue
            out.update(int(b) for b in np.nonzero(ddt[a])[0] if b)
    return out


def _targets(sbox: int, support: int) -> frozenset[int]:
    return frozenset(PERMUTATION[4 * sbox + j] // 4 for j in range(4) if support >> j & 1)


def _ni_two_round_min(supports: set[int]):
    """Truncated branch and bound: active set A in round one, one output
    support per active S-box, cost |A| + #distinct round-two S-boxes hit."""
    best = (math.inf, None)
    for k in range(1, 17):
        if k + 1 >= best[0]:
            break
        for active in itertools.combinations(range(16), k):
            for sups in itertools.product(sorted(supports), repeat=k):
                hit = frozenset().union(*(_targets(a, o) for a, o in zip(active, sups)))
                c = k + len(hit)
                if c < best[0]:
                    best = (c, (active, sups, tuple(sorted(hit))))
    return best


def min_active_sboxes(kind: str, attack: str = "differential", sboxes=None) -> ActiveSboxResult:
    """Exact two-round minimum of active S-boxes.

    I kind: nibble-level search, exact because the diffusion layer is linear
    (and its own transpose, so masks behave like differences). NI kind:
    truncated search over Table I with output supports limited to those
    realizable by single-bit-diffusing optimal S-boxes, or by the given
    ``sboxes`` (instance-level mode).
    """
    if attack not in ("differential", "linear"):
        raise ValueError("attack must be differential or linear")
    claimed = CLAIMED_ACTIVE[(kind, attack)]
    if kind == "i":
        m, pattern = _i_two_round_min()
        return ActiveSboxResult(kind, attack, int(m), pattern, claimed)
    if kind != "ni":
        raise ValueError("kind must be ni or i")
    if attack == "linear":
        raise NotImplementedError("NI linear trails are not searched")
    if sboxes is None:
        supports = set(range(1, 16))  # every nonzero support is reached by a filtered S-box
        single = {b for b in range(1, 16) if b.bit_count() >= 2}
    else:
        supports = realizable_supports(sboxes)
        single = realizable_supports(sboxes, single_bit_input=True)
    m, wit = _ni_two_round_min(supports)
    # the same search with every round-one S-box fed a single-bit difference
    m1, wit1 = _ni_two_round_min(single)
    notes = {"single_bit_input_minimum": int(m1), "single_bit_input_witness": wit1}
    return ActiveSboxResult(kind, attack, int(m), wit, claimed, notes)


# bound calculators


def data_complexity_bounds(rounds: int) -> tuple[Fraction, Fraction]:
    """log2 of the linear and differential data complexities for R rounds.

    P_eps = (2^(n-1) - NL) / 2^n with n = 4, NL = 4, so 2^-2 per S-box and
    N_L >= P_eps^(-2R) = 2^(4R); differentials give the same 2^(4R).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    p_eps = Fraction(2**3 - 4, 2**4)  # = 1/4, a power of two
    log2_p = Fraction(1 - p_eps.denominator.bit_length())
    n_l = -2 * rounds * log2_p
    return n_l, n_l


@dataclass(frozen=True)
class BoundReport:
    kind: str
    class_size_log2: Fraction
    key_entropy: int
    cre_total: Fraction
    n_l_log2: Fraction
    n_d_log2: Fraction
    grover_log2: Fraction
    ccbs_log2: int

    def lines(self, prefix: str = "") -> list[str]:
        return [f"{prefix}{k}={_fmt(v)}" for k, v in self.__dict__.items() if k != "kind"]


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{float(v):.4f}"
    return str(v)


def cardinalities(kind: str, distinct_layers: int = 1, block_bits: int = 64,
                  sbox_set_log2=None, rounds: int | None = None) -> BoundReport:
    """Class cardinality and CRE in log2: |SL| x (N/4) S-box picks + key bits."""
    if block_bits % 4 or block_bits <= 0:
        raise ValueError("block size must be a positive multiple of 4")
    if distinct_layers < 1:
        raise ValueError("need at least one substitution layer")
    per = Fraction(sbox_set_log2) if sbox_set_log2 is not None else SBOX_SET_LOG2[kind]
    size = per * distinct_layers * (block_bits // 4)
    key = KEY_BITS[kind]
    n_l, n_d = data_complexity_bounds(rounds or FULL_ROUNDS[kind])
    return BoundReport(kind, size, key, size + key, n_l, n_d, size / 2, block_bits)


def upper_bound_layers(kind: str) -> int:
    """Independent random layers when every round may differ: all 31 NI rounds;
    for I only half the 32 layers are free since SL_(R-1-i) = SL_i."""
    return NI_ROUNDS if kind == "ni" else 16


@dataclass(frozen=True)
class PerfectBounds:
    n: int
    s_max_log2_exact: float | None
    s_max_log2_stirling: int
    cre_max: int


def log2_factorial_pow2(n: int) -> float:
    """Exact-by-summation log2((2^n)!) for n <= 24."""
    if not 0 <= n <= EXACT_FACTORIAL_MAX_N:
        raise ExactTermUnavailable(f"exact log2((2^{n})!) only for n <= {EXACT_FACTORIAL_MAX_N}")
    total = 0.0
    top = 1 << n
    step = 1 << 20
    for lo in range(1, top + 1, step):
        total += float(np.log2(np.arange(lo, min(lo + step, top + 1), dtype=np.float64)).sum())
    return total


def perfect_bounds(n: int) -> PerfectBounds:
    """S_max = (2^n)! in log2: summed exactly when feasible, and the Stirling
    form (n - 2) 2^n, which is also CRE_max."""
    if n < 1:
        raise ValueError("block size must be positive")
    stirling = (n - 2) * (1 << n)
    exact = log2_factorial_pow2(n) if n <= EXACT_FACTORIAL_MAX_N else None
    return PerfectBounds(n, exact, stirling, stirling)


@dataclass(frozen=True)
class QuantumReport:
    n: int
    kind: str
    ccbs_log2: int
    meets_classical: bool
    meets_postquantum: bool
    grover_log2: Fraction


def modeling_and_quantum(n: int = 64, kind: str = "i") -> QuantumReport:
    """CCBS = 2^n against psi_0 = 2^80 (2^160 post-quantum), and the Grover
    exponent, half the class size in bits."""
    g = cardinalities(kind).grover_log2
    return QuantumReport(n, kind, n, n >= PSI_CLASSICAL, n >= PSI_POSTQUANTUM, g)


def bounds_report(census_count: int | None = None) -> list[str]:
    """Every calculator in key=value form."""
    out = []
    n_l, n_d = data_complexity_bounds(30)
    out += [f"n_l_log2_r30={_fmt(n_l)}", f"n_d_log2_r30={_fmt(n_d)}"]
    for kind in ("ni", "i"):
        out += cardinalities(kind).lines(f"{kind}_")
        ub = cardinalities(kind, upper_bound_layers(kind))
        out.append(f"{kind}_upper_bound_bits={_fmt(ub.cre_total)}")
        out.append(f"{kind}_grover_exponent={round(cardinalities(kind).grover_log2)}")
    if census_count:
        size = cardinalities("i", sbox_set_log2=math.log2(census_count)).class_size_log2
        out.append(f"i_sbox_set_log2_census={math.log2(census_count):.4f}")
        out.append(f"i_class_size_log2_census={_fmt(Fraction(size))}")
    for n in (4, 6, 10):
        pb = perfect_bounds(n)
        out.append(f"s_max_log2_exact_n{n}={pb.s_max_log2_exact:.2f}")
        out.append(f"s_max_log2_stirling_n{n}={pb.s_max_log2_stirling}")
    mq = modeling_and_quantum(64, "ni")
    out += [f"ccbs_log2={mq.ccbs_log2}", f"meets_psi0_2^80={int(mq.meets_classical)}",
            f"meets_psi0_2^160={int(mq.meets_postquantum)}"]
    return out


def emit_csv(report, path) -> None:
    """One row per round (AvalancheReport) or instance (ClassAvalancheReport)."""
    try:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(report.columns)
            w.writerows(report.rows())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
