"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from noon_ocm import _kernels_py

try:
    from noon_ocm import _kernels
except ImportError:
    _kernels = None


def workloads(rng):
    pixels = rng.integers(0, 11, (10**6, 4)).astype(np.int64)
    fired = rng.random((10**5, 11)) < 0.1
    lengths = fired.sum(axis=1)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    channels = np.nonzero(fired)[1].astype(np.int64)
    rates = rng.random(11) * 1e-3
    return {
        "pixel_sum_counts (1e6 x 4)": lambda k: k.pixel_sum_counts(pixels, 41),
        "count_coincidences (1e5 pulses, order 3)": lambda k: k.count_coincidences(offsets, channels, 11, 3),
        "tuple_sum_weights (D=11, N=4, distinct)": lambda k: k.tuple_sum_weights(rates, 4, True),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':44s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in workloads(rng).items():
        times = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for b, k in backends.items()}
        row = f"{name:44s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times.values())
        if len(times) == 2:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
