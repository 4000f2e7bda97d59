"""Time the compiled and pure-Python kernels on the same exact workload.

For each k the workload is: solve the ansatz, then one cofactor expansion
giving det A and the last adjugate column.  Each backend runs in its own
interpreter because the backend is fixed at import time.

    python3 benchmarks/bench_kernels.py --k 4 5 6 7
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from kintraj import kernels
from kintraj.trajectory import build_pair
out = {"backend": kernels.BACKEND, "timings": {}}
for k in map(int, sys.argv[1:]):
    start = time.perf_counter()
    pair = build_pair(k)
    built = time.perf_counter()
    det, column = pair.A.det_and_adjugate_column(k)
    done = time.perf_counter()
    out["timings"][k] = {"build": built - start, "det_and_column": done - built, "terms": sum(len(p) for p in column)}
print(json.dumps(out))
"""


def run_backend(pure: bool, ks) -> dict:
    env = dict(os.environ)
    if pure:
        env["KINTRAJ_PURE_PYTHON"] = "1"
    else:
        env.pop("KINTRAJ_PURE_PYTHON", None)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, *map(str, ks)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(proc.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--k", type=int, nargs="+", default=[3, 4, 5, 6, 7])
    args = parser.parse_args(argv)
    fast = run_backend(False, args.k)
    slow = run_backend(True, args.k)
    if fast["backend"] != "cython":
        print("compiled kernel not available; both runs used the Python fallback", file=sys.stderr)
    print(f"{'k':>3} {'cython s':>10} {'python s':>10} {'speedup':>8} {'terms':>7}")
    for k in args.k:
        f = fast["timings"][str(k)]
        s = slow["timings"][str(k)]
        tf = f["build"] + f["det_and_column"]
        ts = s["build"] + s["det_and_column"]
        assert f["terms"] == s["terms"]
        print(f"{k:>3} {tf:>10.3f} {ts:>10.3f} {ts / tf:>7.1f}x {f['terms']:>7}")


if __name__ == "__main__":
    main()
