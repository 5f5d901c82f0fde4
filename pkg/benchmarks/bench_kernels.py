"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--objects 40] [--json out.json]

Kernels are timed by importing both backends directly; the training step is
timed in a subprocess per backend (NMP_PURE_PYTHON=1 forces the fallback)
because the dispatch happens at import time.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from nmprel import _kernels_py

try:
    from nmprel import _ckernels
except ImportError:
    _ckernels = None

TRAIN_STEP = """
import json, sys, timeit
from nmprel import kernels, training as TR
from nmprel.scenedata import SyntheticConfig, generate_synthetic
scenes = generate_synthetic(SyntheticConfig(num_scenes=20, objects_per_scene={objects}, seed=0))
cfg = TR.TrainConfig(epochs=1, seed=0)
best = min(timeit.repeat(lambda: TR.train(scenes, cfg), number=1, repeat={repeat})) / len(scenes)
print(json.dumps({{"backend": kernels.BACKEND, "seconds": best}}))
"""


def kernel_cases(n, rng):
    xy = rng.uniform(0, 800, size=(n, 2))
    boxes = np.concatenate([xy, rng.uniform(5, 200, size=(n, 2))], axis=1)
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    values = rng.normal(size=(len(ii), 64))
    compat = rng.random((n, n)) < 0.1
    return {
        "pair_features": lambda m: m.pair_features(boxes, ii, jj, 1000.0, 1000.0),
        "threshold_edges": lambda m: m.threshold_edges(boxes, 1000.0, 1000.0, 0.45, 0.5),
        "segment_sum": lambda m: m.segment_sum(values, jj, n),
        "max_matching": lambda m: m.max_matching(compat),
    }


def time_call(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def time_train_step(pure, objects, repeat):
    env = dict(os.environ)
    env.pop("NMP_PURE_PYTHON", None)
    if pure:
        env["NMP_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", TRAIN_STEP.format(objects=objects, repeat=repeat)],
                         env=env, check=True, capture_output=True, text=True).stdout
    return json.loads(out.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--objects", type=int, default=40, help="objects per scene for the kernel cases")
    parser.add_argument("--train-objects", type=int, default=6)
    parser.add_argument("--json", help="also write the results here")
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    rows = []
    for name, fn in kernel_cases(args.objects, rng).items():
        py = time_call(lambda: fn(_kernels_py), args.repeat)
        cy = time_call(lambda: fn(_ckernels), args.repeat) if _ckernels is not None else None
        rows.append({"case": name, "python_s": py, "cython_s": cy})

    steps = {pure: time_train_step(pure, args.train_objects, min(args.repeat, 3)) for pure in (True, False)}
    rows.append({"case": "train_step (per scene)", "python_s": steps[True]["seconds"],
                 "cython_s": steps[False]["seconds"] if steps[False]["backend"] == "cython" else None})

    print(f"{'case':<24} {'python':>12} {'cython':>12} {'speedup':>8}")
    for r in rows:
        cy = f"{r['cython_s'] * 1e6:10.1f}us" if r["cython_s"] else f"{'n/a':>12}"
        speed = f"{r['python_s'] / r['cython_s']:7.1f}x" if r["cython_s"] else f"{'-':>8}"
        print(f"{r['case']:<24} {r['python_s'] * 1e6:10.1f}us {cy} {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
