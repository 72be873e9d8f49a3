"""Asymptotic cost classes per rule and measured per-iteration wall time.

Timings use deliberately plain Python loops so the operation count, not
NumPy dispatch overhead, dominates: AC walks neighbor lists, while the
weighted rules apply their dense Perron row over all ``N`` entries.
"""
from __future__ import annotations

import csv
import io
import time

import numpy as np

from ..consensus import ALL_RULES, ConsensusRule, build_perron, default_alpha
from ..graph import Topology, load_topology

COMPLEXITY_CLASS = {
    ConsensusRule.AC: "O(KN)",
    ConsensusRule.WAC: "O(KN^2)",
    ConsensusRule.WAC_AE: "O(KN^2)",
    ConsensusRule.IWAC: "O(KN^2)",
}
TIMING_SIZES = (6, 10, 20, 40)


def complexity_class(rule) -> str:
    return COMPLEXITY_CLASS[ConsensusRule.parse(rule) if isinstance(rule, str) else rule]


def chained_topology(copies: int, base: Topology | None = None) -> Topology:
    """``copies`` of ``base`` (default topo10) joined last node to first node."""
    base = base or load_topology("topo10")
    n = base.n
    edges = []
    for c in range(copies):
        edges.extend((i + c * n, j + c * n) for i, j in base.edges)
        if c:
            edges.append((c * n - 1, c * n))
    return Topology(n * copies, tuple(edges), name=f"{base.name}x{copies}")


def timing_topology(n: int) -> Topology:
    if n in (6, 10, 20):
        return load_topology(f"topo{n}")
    if n % 10 == 0:
        return chained_topology(n // 10)
    raise ValueError(f"no timing topology with {n} nodes")


def _step_sparse(nbrs, coef, x):
    out = list(x)
    for i, row in enumerate(nbrs):
        xi = x[i]
        acc = 0.0
        for j in row:
            acc += x[j] - xi
        out[i] = xi + coef * acc
    return out


def _step_dense(P, x):
    n = len(x)
    out = [0.0] * n
    for i in range(n):
        row = P[i]
        acc = 0.0
        for j in range(n):
            acc += row[j] * x[j]
        out[i] = acc
    return out


def time_per_iteration(rule, topology: Topology, iters: int = 200, repeats: int = 3,
                       seed: int = 0) -> float:
    """Best-of-``repeats`` seconds per iteration of the reference loop."""
    rule = ConsensusRule.parse(rule) if isinstance(rule, str) else rule
    rng = np.random.default_rng(seed)
    w = rng.uniform(1.0, 10.0, topology.n)
    x0 = list(rng.uniform(1.0, 2.0, topology.n))
    if rule is ConsensusRule.AC:
        nbrs = [topology.neighbors(i) for i in range(topology.n)]
        coef = default_alpha(rule, topology)

        def step(x):
            return _step_sparse(nbrs, coef, x)
    else:
        P = build_perron(rule, topology, w, default_alpha(rule, topology, w)).P.tolist()

        def step(x):
            return _step_dense(P, x)
    best = float("inf")
    for _ in range(repeats):
        x = x0
        t0 = time.perf_counter()
        for _ in range(iters):
            x = step(x)
        best = min(best, (time.perf_counter() - t0) / iters)
    return best


def complexity_report(rules=ALL_RULES, sizes=TIMING_SIZES, measure: bool = False, **timing_kw):
    """Rows ``{rule, class, timings}``; ``timings`` maps N to seconds when ``measure``."""
    rows = []
    for r in rules:
        rule = ConsensusRule.parse(r) if isinstance(r, str) else r
        timings = {}
        if measure:
            timings = {n: time_per_iteration(rule, timing_topology(n), **timing_kw) for n in sizes}
        rows.append({"rule": rule.label, "class": COMPLEXITY_CLASS[rule], "timings": timings})
    return rows


def complexity_csv(rows) -> str:
    """Deterministic table of cost classes; timings are reported separately."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["rule", "complexity"])
    for row in rows:
        wr.writerow([row["rule"], row["class"]])
    return buf.getvalue()
