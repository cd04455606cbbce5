"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--n 100000] [--repeat 5] [--census]
"""
import argparse
import time

import numpy as np

from sucsim import kernels
from sucsim.genie import sample_instance
from sucsim.trng import Trng


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--census", action="store_true", help="also time one census slice (slow on the fallback)")
    args = ap.parse_args()

    ni = sample_instance("ni", Trng(b"\x01" * 32))
    ci = sample_instance("i", Trng(b"\x02" * 32))
    xs = np.random.default_rng(0).integers(0, 1 << 64, size=args.n, dtype=np.uint64)
    ys = ni.encrypt_many(xs)

    jobs = {
        "ni_encrypt": lambda k: k.ni_encrypt(xs, ni._sp, ni._keys),
        "ni_decrypt": lambda k: k.ni_decrypt(ys, ni._pinv, ni._sinv, ni._keys),
        "ni_rounds": lambda k: k.ni_rounds(xs[: args.n // 10], ni._sp, ni._keys),
        "i_apply": lambda k: k.i_apply(xs, ci._sl, ci._keys),
        "i_rounds": lambda k: k.i_rounds(xs[: args.n // 10], ci._sl, ci._keys),
    }
    if args.census:
        jobs["census_slice"] = lambda k: k.enumerate_involutive_optimal(15)

    backends = kernels.available_backends()
    print(f"n={args.n} repeat={args.repeat} backends={','.join(backends)}")
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    for name, job in jobs.items():
        reps = 1 if name == "census_slice" else args.repeat
        t = {b: best_of(lambda: job(m), reps) for b, m in backends.items()}
        line = f"{name:<14}" + "".join(f"{t[b] * 1e3:>10.2f}ms" for b in backends)
        if len(t) == 2:
            line += f"  {t['python'] / t['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
