"""Compare the compiled and numpy kernels on batched Killing / derivative / Nijenhuis evaluation.

    python benchmarks/bench_kernels.py [--points 2000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from sepcoords import kernels
from sepcoords.bivector import BivectorForm, sample_frames, stack_frames


def bench(n: int, points: int, repeat: int) -> dict:
    B = BivectorForm.random(n, 0).B
    X, F = stack_frames(sample_frames(n, points, 0))
    row = {"n": n, "points": points}
    results = {}
    for name in kernels.AVAILABLE:
        def run():
            K = kernels.killing(B, X, F, backend=name)
            D = kernels.nabla(B, X, F, backend=name)
            return kernels.nijenhuis(K, D, backend=name)

        results[name] = run()
        t = min(timeit.repeat(run, number=1, repeat=repeat))
        row[f"{name}_ms"] = round(1e3 * t, 3)
    if len(results) == 2:
        row["max_abs_diff"] = float(np.abs(results["python"][0] - results["cython"][0]).max())
        row["speedup"] = round(row["python_ms"] / row["cython_ms"], 2)
    return row


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dims", default="2,3,4,5")
    args = ap.parse_args(argv)
    print(f"backends: {', '.join(kernels.AVAILABLE)} (default {kernels.BACKEND})")
    for n in (int(v) for v in args.dims.split(",")):
        print(json.dumps(bench(n, args.points, args.repeat)))


if __name__ == "__main__":
    main()
