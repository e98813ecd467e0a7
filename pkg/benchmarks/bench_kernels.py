"""Compare the compiled kernels with the numpy fallback.

Kernel timings call both backends in-process; end-to-end step rates run a
short training job in a subprocess per backend, because the backend is
fixed at import time.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--steps 200]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from jointmatch import _backend, _kernels_py

E2E = """
import json, sys, time, logging
logging.disable(logging.WARNING)
from jointmatch import _backend
from jointmatch.config import TrainConfig
from jointmatch.harness import train
cfg = TrainConfig(**json.loads(sys.argv[1]))
t = time.perf_counter()
train(cfg)
print(json.dumps({"backend": _backend.BACKEND, "seconds": time.perf_counter() - t}))
"""


def kernel_cases(rng):
    logits = rng.normal(scale=3, size=(80, 4))
    targets = rng.integers(0, 4, 80)
    weights = rng.uniform(size=80)
    probs = _kernels_py.softmax_rows(logits)
    th = np.array([0.9, 0.5, 0.7, 0.98])
    lengths = rng.integers(10, 40, size=80)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    flat = rng.integers(0, 5000, size=offsets[-1]).astype(np.int64)
    so = np.concatenate([[0], np.cumsum(rng.integers(0, 3, 5000))]).astype(np.int64)
    sf = rng.integers(0, 5000, size=so[-1]).astype(np.int64)
    u = rng.random((flat.shape[0], 5))
    return {
        "softmax_rows": (logits,),
        "xent_backward": (logits, targets, weights, 80.0),
        "select_pseudo": (probs, th),
        "hashed_bow": (flat, offsets, 2048),
        "augment_tokens": (flat, offsets, sf, so, u, 0.5, 0.1, 3, 1.0),
    }


def bench_kernels(repeat, number):
    try:
        compiled, _ = _backend.load("compiled")
    except ImportError:
        compiled = None
    cases = kernel_cases(np.random.default_rng(0))
    rows = []
    for name, args in cases.items():
        row = {"kernel": name}
        for label, mod in (("python", _kernels_py), ("compiled", compiled)):
            if mod is None:
                row[label + "_us"] = None
                continue
            fn = getattr(mod, name)
            best = min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number))
            row[label + "_us"] = best / number * 1e6
        rows.append(row)
    return rows


def bench_e2e(cfg, backend):
    env = dict(os.environ, JOINTMATCH_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", E2E, json.dumps(cfg)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()

    print(f"{'kernel':<16}{'python us':>12}{'compiled us':>14}{'speedup':>10}")
    for r in bench_kernels(args.repeat, args.number):
        c = r["compiled_us"]
        speed = f"{r['python_us'] / c:.1f}x" if c else "n/a"
        c_txt = f"{c:.1f}" if c else "n/a"
        print(f"{r['kernel']:<16}{r['python_us']:>12.1f}{c_txt:>14}{speed:>10}")

    tasks = {
        "synthetic": {"steps": args.steps, "eval_every": args.steps},
        "text": {"steps": args.steps, "eval_every": args.steps, "task": "text",
                 "corpus_path": os.path.join(os.path.dirname(__file__), "..", "src",
                                             "jointmatch", "data", "sample_news.csv"),
                 "synonyms_path": os.path.join(os.path.dirname(__file__), "..", "src",
                                               "jointmatch", "data", "synonyms.tsv"),
                 "labels_per_class": 5, "unlabeled_per_class": 60, "val_per_class": 10,
                 "test_per_class": None, "n_buckets": 512},
    }
    print(f"\n{'task':<12}{'backend':<10}{'steps/s':>10}")
    for task, cfg in tasks.items():
        for backend in ("python", "compiled"):
            try:
                r = bench_e2e(cfg, backend)
            except subprocess.CalledProcessError:
                print(f"{task:<12}{backend:<10}{'n/a':>10}")
                continue
            print(f"{task:<12}{r['backend']:<10}{args.steps / r['seconds']:>10.1f}")


if __name__ == "__main__":
    main()
