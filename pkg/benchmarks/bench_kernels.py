"""Time the compiled kernel against the pure-Python fallback.

Each case runs the same seeded engine call through both kernels, checks that
the results agree, and reports wall time per run and evaluations per second.

    python benchmarks/bench_kernels.py            # default cases
    python benchmarks/bench_kernels.py --quick    # smaller sizes, a few seconds
"""

import argparse
import time

import numpy as np

from onell import _pykernel
from onell.algorithms import _kernel_args
from onell.core import RandomSource, uniform_bitstring
from onell.kernel import compiled_kernel
from onell.problems import OneMax, random_planted_instance

ALGOS = {"fixed": _pykernel.ALGO_FIXED, "adaptive": _pykernel.ALGO_ADAPTIVE, "opo": _pykernel.ALGO_OPO}


def run_once(k, problem, algo, lam, cap, seed, budget):
    rng = RandomSource(seed)
    x = uniform_bitstring(problem.n, rng)
    t0 = time.perf_counter()
    out = k.run_engine(*_kernel_args(problem), x.bits, rng.getstate(), ALGOS[algo], float(lam), float(cap),
                       1.5, 5, budget, False, 1)
    return time.perf_counter() - t0, out


def bench(name, problem, algo, lam, cap, seed, budget, repeats, kernels):
    results = {}
    for label, k in kernels:
        times, out = [], None
        for _ in range(repeats):
            dt, out = run_once(k, problem, algo, lam, cap, seed, budget)
            times.append(dt)
        results[label] = (min(times), out)
    outs = [o for _, o in results.values()]
    agree = all(np.array_equal(outs[0]["x"], o["x"]) and outs[0]["evaluations"] == o["evaluations"] for o in outs)
    evals = outs[0]["evaluations"]
    cells = [f"{name:<34}", f"{evals:>10}"]
    for label, (t, _) in results.items():
        cells.append(f"{label}: {t * 1e3:9.1f} ms {evals / t:12.0f} ev/s")
    if len(results) == 2:
        (_, (tc, _)), (_, (tp, _)) = results.items()
        cells.append(f"speedup {tp / tc:6.1f}x")
    cells.append("ok" if agree else "MISMATCH")
    print("  ".join(cells), flush=True)
    return agree


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    ck = compiled_kernel()
    kernels = [("cython", ck)] if ck is not None else []
    kernels.append(("python", _pykernel))
    if ck is None:
        print("compiled kernel not built; timing the pure-Python kernel only")

    scale = 1 if args.quick else 4
    n1, n2 = 1000 * scale, 256 * scale
    inst = random_planted_instance(n2, int(4 * n2 * np.log(n2)), 1)
    cases = [
        (f"onemax n={n1} opo", OneMax(n1), "opo", 1, 1),
        (f"onemax n={n1} fixed lambda=8", OneMax(n1), "fixed", 8, 8),
        (f"onemax n={n1} adaptive cap=n", OneMax(n1), "adaptive", 1, n1),
        (f"3cnf n={n2} adaptive cap=2ln", inst.problem, "adaptive", 1, 2 * np.log(n2 + 1)),
        (f"3cnf n={n2} adaptive cap=n", inst.problem, "adaptive", 1, n2),
    ]
    print(f"{'case':<34}  {'evals':>10}")
    ok = all(bench(name, p, a, lam, cap, 7, 10**7, args.repeats, kernels) for name, p, a, lam, cap in cases)
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
