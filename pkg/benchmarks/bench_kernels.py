"""Compare the compiled and NumPy consensus kernels.

Usage: python3 benchmarks/bench_kernels.py [--trials N] [--iters K] [--repeats R]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from dcss import _kernels_py
from dcss.consensus import ConsensusRule, default_alpha, edge_coefficients
from dcss.graph import LinkFailureModel, load_topology, sample_edge_mask

try:
    from dcss import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _case(topo_name, rule, trials, iters, pr_fail, seed=0):
    topo = load_topology(topo_name)
    rng = np.random.default_rng(seed)
    w = rng.uniform(1.0, 10.0, topo.n)
    alpha = default_alpha(rule, topo, w)
    coeffs = edge_coefficients(rule, topo, w, alpha)
    x0 = rng.uniform(5.0, 40.0, (trials, topo.n))
    masks = None
    if pr_fail > 0:
        masks = sample_edge_mask(topo, LinkFailureModel.from_pr_fail(pr_fail), rng,
                                 size=(trials, iters)).astype(np.uint8)
    return x0, coeffs, masks


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'case':32s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup  max|dx|")
    for topo_name, rule, pr_fail in (("topo6", ConsensusRule.AC, 0.0),
                                     ("topo10", ConsensusRule.IWAC, 0.0),
                                     ("topo10", ConsensusRule.WAC_AE, 0.4),
                                     ("topo20", ConsensusRule.WAC, 0.4)):
        x0, (ei, ej, ci, cj), masks = _case(topo_name, rule, args.trials, args.iters, pr_fail)
        times, outs = {}, {}
        for name, mod in backends.items():
            times[name], outs[name] = _time(
                lambda mod=mod: mod.consensus_batch(x0, ei, ej, ci, cj, masks, args.iters,
                                                    -1.0, False), args.repeats)
        label = f"{topo_name}/{rule.label}/pf{pr_fail}"
        row = " ".join(f"{times[b] * 1e3:8.1f}ms" for b in backends)
        if "cython" in backends:
            dx = np.max(np.abs(outs["python"][0] - outs["cython"][0]))
            print(f"{label:32s} {row}   {times['python'] / times['cython']:6.1f}x  {dx:.1e}")
        else:
            print(f"{label:32s} {row}   (compiled kernel unavailable)")


if __name__ == "__main__":
    main()
