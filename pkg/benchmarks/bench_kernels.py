"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends receive the same inputs; the script also checks that their
outputs are identical before reporting timings.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from causal_covering import _pykernels
from causal_covering.harness import OrTreeSpec, build_or_tree
from causal_covering.inference import build_plan

try:
    from causal_covering import _ckernels
except ImportError:
    _ckernels = None


def sampling_case(h, rows, seed=0):
    model, arms = build_or_tree(OrTreeSpec(h=h))
    rng = np.random.default_rng(seed)
    iv = arms[rng.integers(0, len(arms), size=rows)]
    u = rng.random((rows, model.n))
    return (iv, u, model._latent_p, model._par_ptr, model._par_idx, model._cpt_ptr, model._cpt_flat)


def elimination_case(n_vars, n_factors, seed=0):
    rng = np.random.default_rng(seed)
    factors = []
    for v in range(n_vars):
        # chain-plus-skip structure keeps the width moderate
        scope = tuple(sorted({v, (v + 1) % n_vars, (v + 3) % n_vars}))
        factors.append((scope, rng.random(1 << len(scope))))
    factors = factors[:n_factors]
    plan = build_plan(tuple(s for s, _ in factors))
    return [t for _, t in factors], plan


AGENT_RUN = """
import time, numpy as np
from causal_covering.algorithms import AGENTS, Environment
from causal_covering.harness import OrTreeSpec, build_or_tree
model, arms = build_or_tree(OrTreeSpec(h=5))
for agent in ("covering", "direct", "propinf"):
    t0 = time.perf_counter()
    for run in range(5):
        AGENTS[agent](Environment(model), arms, 1 << 17, np.random.default_rng(run))
    print(agent, (time.perf_counter() - t0) / 5 * 1e3)
"""


def agent_timings(pure):
    env = {k: v for k, v in os.environ.items() if k != "CAUSAL_COVERING_PURE"}
    if pure:
        env["CAUSAL_COVERING_PURE"] = "1"
    out = subprocess.run([sys.executable, "-c", AGENT_RUN], env=env, check=True,
                         capture_output=True, text=True).stdout
    return {name: float(ms) for name, ms in (line.split() for line in out.splitlines())}


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the numpy backend is available")

    cases = [(f"sample_rows OR tree h={h}, {rows} rows", "sample_rows", sampling_case(h, rows))
             for h, rows in ((5, 1 << 15), (7, 1 << 15))]
    cases += [(f"run_plan {n} vars", "run_plan", elimination_case(n, n)) for n in (12, 20)]

    print(f"{'kernel':<36} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for label, name, case in cases:
        py_fn = getattr(_pykernels, name)
        t_py = best_of(lambda: py_fn(*case), args.repeat)
        if _ckernels is None:
            print(f"{label:<36} {t_py * 1e3:>10.2f} {'-':>10} {'-':>8}")
            continue
        c_fn = getattr(_ckernels, name)
        if not np.array_equal(np.asarray(py_fn(*case)), np.asarray(c_fn(*case))):
            raise SystemExit(f"backends disagree on {label}")
        t_c = best_of(lambda: c_fn(*case), args.repeat)
        print(f"{label:<36} {t_py * 1e3:>10.2f} {t_c * 1e3:>10.2f} {t_py / t_c:>7.1f}x")

    if _ckernels is not None:
        print("\none agent run on the h=5 OR tree at T=2^17 (mean of 5)")
        slow, fast = agent_timings(pure=True), agent_timings(pure=False)
        for agent in slow:
            print(f"{agent:<36} {slow[agent]:>10.1f} {fast[agent]:>10.1f} "
                  f"{slow[agent] / fast[agent]:>7.1f}x")


if __name__ == "__main__":
    main()
