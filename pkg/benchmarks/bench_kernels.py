"""Compare the compiled and pure-Python Riccati kernels.

Runs plain fixed-point iteration (no tail acceleration, so every step goes
through the kernel) on a few plants and reports median wall time per
backend, the speedup and the largest difference between the two solutions
relative to the solution size.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--max-iter 4000]
"""
import argparse
import statistics
import time

import numpy as np

from desslab import _kernels
from desslab.riccati import DareOptions, solve_dare_sf
from desslab.ring import RingSpec, SensorConfig, augment

# deadbeat cases finish in d+1 steps and mostly measure call overhead; the
# fast-only cases sit just below the breaking point and iterate for thousands
CASES = [
    ("n=5 slow d=3", RingSpec(5, 1.856), SensorConfig.slow(3)),
    ("n=8 diverse d=4", RingSpec(8, 1.5), SensorConfig.diverse(2, 4)),
    ("n=5 fast d=0", RingSpec(5, 1.85), SensorConfig.fast(1, 0)),
    ("n=5 fast d=3", RingSpec(5, 1.85), SensorConfig.fast(1, 3)),
    ("n=12 fast d=1", RingSpec(12, 1.45), SensorConfig.fast(3, 1)),
    ("n=20 fast d=1", RingSpec(20, 1.02), SensorConfig.fast(1, 1)),
    ("n=20 fast d=3", RingSpec(20, 1.02), SensorConfig.fast(1, 3)),
]


def _dual(plant):
    R = np.zeros((plant.C.shape[0],) * 2)
    return plant.A.T, plant.C.T, plant.B1 @ plant.B1.T, R


def _time(args, opts, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = solve_dare_sf(*args, opts=opts)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--max-iter", type=int, default=4000)
    args = ap.parse_args(argv)

    backends = _kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    opts = DareOptions(accelerate=False, max_iter=args.max_iter)
    prev = _kernels.BACKEND
    header = f"{'case':<20}{'N':>4}{'iters':>7}" + "".join(f"{b + ' ms':>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}{'rel |dP|':>12}"
    print(header)
    try:
        for name, spec, sensors in CASES:
            plant = augment(spec, sensors)
            dare = _dual(plant)
            row, sols = [], {}
            for b in backends:
                _kernels.set_backend(b)
                t, (P, status, its) = _time(dare, opts, args.repeat)
                row.append(t)
                sols[b] = P
            line = f"{name:<20}{plant.dims.N:>4}{its:>7}" + "".join(f"{1e3 * t:>14.2f}" for t in row)
            if len(backends) == 2:
                diff = float(np.max(np.abs(sols["compiled"] - sols["python"]))
                             / max(1.0, np.max(np.abs(sols["python"]))))
                line += f"{row[1] / row[0]:>9.1f}x{diff:>12.1e}"
            print(line)
    finally:
        _kernels.set_backend(prev)


if __name__ == "__main__":
    main()
