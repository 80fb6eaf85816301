#!/usr/bin/env python3
"""Compare the numba and numpy stencil backends on a full-size volume.

Usage:
    python3 benchmarks/bench_backends.py [--dims 128,192,192] [--classes 4] [--repeats 3]

Runs the spatially varying smoothing pass once per backend per repeat and
reports wall-clock times plus the max absolute difference between backends.
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from svls import engine, svls_weights, svls_smooth
from svls.phantom import PhantomSpec, generate_labels


def run_backend(backend: str, labels, kernel, repeats: int):
    os.environ[engine.ENV_BACKEND] = backend
    svls_smooth(labels, kernel)  # warm-up (JIT compile for numba)
    times = []
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = svls_smooth(labels, kernel)
        times.append(time.perf_counter() - start)
    return min(times), result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", default="128,192,192")
    parser.add_argument("--classes", type=int, default=4)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    dims = tuple(int(d) for d in args.dims.split(","))
    spec = PhantomSpec(kind="nested_spheres", dims=dims, num_classes=max(args.classes, 3))
    labels = generate_labels(spec)
    kernel = svls_weights(labels.rank)

    backends = ["numpy"] + (["numba"] if engine.HAVE_NUMBA else [])
    saved = os.environ.get(engine.ENV_BACKEND)
    results = {}
    try:
        for backend in backends:
            best, out = run_backend(backend, labels, kernel, args.repeats)
            results[backend] = (best, out)
            print(f"{backend:>6}: best of {args.repeats} = {best:8.3f} s "
                  f"({np.prod(dims) * labels.num_classes / best / 1e6:8.1f} Mvoxel-planes/s)")
    finally:
        if saved is None:
            os.environ.pop(engine.ENV_BACKEND, None)
        else:
            os.environ[engine.ENV_BACKEND] = saved

    if len(results) == 2:
        diff = np.abs(results["numpy"][1].data.astype(np.float64)
                      - results["numba"][1].data.astype(np.float64)).max()
        speedup = results["numpy"][0] / results["numba"][0]
        print(f"numba speedup: {speedup:.2f}x, max |numpy - numba| = {diff:g}")


if __name__ == "__main__":
    main()
