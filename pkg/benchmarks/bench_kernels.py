"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same inputs under both backends; outputs are checked
for bit-identity before timings are reported.
"""

import argparse
import timeit

import numpy as np

from hems.data import synth_generate
from hems.env import ApplianceSpec
from hems.kernels import _pykernels

try:
    from hems.kernels import _ckernels
except ImportError:
    _ckernels = None


def workloads(spec: ApplianceSpec):
    day = synth_generate(0, 1)[0]
    off, on = day.stage_costs(spec)
    rng = np.random.default_rng(0)
    requested = rng.integers(0, 2, size=24, dtype=np.int8)
    batch = rng.integers(0, 2, size=(4096, 24), dtype=np.int8)
    return {
        "rollout (24 steps)": lambda k: k.rollout(off, on, 0, spec.required_hours, requested, 0.0),
        "batch_costs (4096 x 24)": lambda k: k.batch_costs(off, on, spec.required_hours, batch),
        "backward_induction (24 x 3)": lambda k: k.backward_induction(off, on, spec.required_hours),
    }


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; only the pure-Python backend is available")
    print(f"{'kernel':<30} {'python (us)':>12} {'cython (us)':>12} {'speedup':>8}")
    for name, fn in workloads(ApplianceSpec()).items():
        number = 20 if "batch" in name else 2000
        py = min(timeit.repeat(lambda: fn(_pykernels), number=number, repeat=args.repeat)) / number * 1e6
        if _ckernels is None:
            print(f"{name:<30} {py:>12.1f} {'-':>12} {'-':>8}")
            continue
        if not same(fn(_pykernels), fn(_ckernels)):
            raise SystemExit(f"{name}: backends disagree")
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=number, repeat=args.repeat)) / number * 1e6
        print(f"{name:<30} {py:>12.1f} {cy:>12.1f} {py / cy:>7.1f}x")


if __name__ == "__main__":
    main()
