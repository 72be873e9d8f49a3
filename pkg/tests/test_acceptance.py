"""Acceptance criteria, one check per criterion.

Each check returns ``(passed, detail)``.  Under pytest every check is a test
and a summary line per criterion is printed at the end of the session; run
this file directly to print the same lines without pytest.
"""
from __future__ import annotations

import filecmp
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

# tolerances and sizes
PERRON_TRIPLES = 1000
PERRON_ROW_TOL = 1e-12
PERRON_MAX_SECONDS = 5.0
CONSERVE_RUNS = 100
CONSERVE_ITERS = 100
CONSERVE_TOL = 1e-10
FIXED_ITERS = 2000
FIXED_TOL = 1e-8
ITER_TARGETS = {"AC": 4.0, "WAC-AE": 5.0}
ITER_ABS, ITER_REL = 3.0, 0.30
ITER_REALIZATIONS = 500
ITER_MAX_ITERS = 50
ITER_MAX_SECONDS = 120.0
ROC_TRIALS = 5000
ROC_SIGMAS = 2.0
ROC_AC_EGC_TOL = 0.03
ROC_MOBILITY_TOL = 0.05
ROC_MAX_SECONDS = 300.0
LOCAL_K = 500  # consensus limit, as for the post-convergence ROC decisions
LOCAL_TRIALS = 20000
LOCAL_TOL = 0.03
LOCAL_PF = np.round(np.linspace(0.05, 0.95, 19), 10)
DP_TOL = 1e-12
DP_MAX_N = 20

RESULTS: dict[str, tuple[bool, str]] = {}


def _record(key, title):
    def deco(fn):
        def run():
            if key not in RESULTS:
                ok, detail = fn()
                RESULTS[key] = (bool(ok), f"{title}: {detail}")
            return RESULTS[key]
        run.key, run.title = key, title
        return run
    return deco


def _random_topology(rng, n):
    from dcss.graph import Topology
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.3:
                edges.add((i, j))
    return Topology(n, tuple(sorted(edges)))


@_record("C1", "Perron validity")
def check_perron_validity():
    from dcss.consensus import ALL_RULES, build_perron, max_step_size
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_row, min_entry = 0.0, np.inf
    for _ in range(PERRON_TRIPLES):
        n = int(rng.integers(2, 21))
        topo = _random_topology(rng, n)
        w = rng.uniform(0.05, 50.0, n)
        frac = rng.uniform(0.01, 0.999)
        for rule in ALL_RULES:
            P = build_perron(rule, topo, w, frac * max_step_size(rule, topo, w)).P
            worst_row = max(worst_row, float(np.max(np.abs(P.sum(axis=1) - 1.0))))
            min_entry = min(min_entry, float(P.min()))
    dt = time.perf_counter() - t0
    ok = worst_row <= PERRON_ROW_TOL and min_entry >= 0.0 and dt < PERRON_MAX_SECONDS
    return ok, (f"{PERRON_TRIPLES} triples x 4 rules, max |row sum - 1| = {worst_row:.1e}, "
                f"min entry = {min_entry:.3g}, {dt:.2f} s")


@_record("C2", "Conservation oracles")
def check_conservation():
    from dcss.consensus import (ALL_RULES, ConsensusRule, build_perron, default_alpha,
                                left_unit_eigenvector)
    from dcss.graph import load_topology
    rng = np.random.default_rng(2)
    topos = [load_topology("topo6"), load_topology("topo10")]
    worst = 0.0
    for run in range(CONSERVE_RUNS):
        topo = topos[run % 2]
        w = rng.uniform(0.5, 20.0, topo.n)
        x = rng.uniform(1.0, 100.0, topo.n)
        for rule in ALL_RULES:
            P = build_perron(rule, topo, w, default_alpha(rule, topo, w)).P
            if rule is ConsensusRule.AC:
                v = np.ones(topo.n)
            elif rule is ConsensusRule.IWAC:
                v = left_unit_eigenvector(P)
            else:
                v = w
            ref = v @ x
            xk = x
            for _ in range(CONSERVE_ITERS):
                xk = P @ xk
                worst = max(worst, abs(v @ xk - ref) / abs(ref))
    return worst <= CONSERVE_TOL, (f"{CONSERVE_RUNS} runs x {CONSERVE_ITERS} iterations, "
                                   f"max relative drift {worst:.1e} (tol {CONSERVE_TOL:g})")


@_record("C3", "Fixed-point oracle")
def check_fixed_point():
    from dcss.consensus import ALL_RULES, ConsensusRule, predicted_limit, run_consensus, stated_iwac_limit
    from dcss.scenario import ScenarioConfig
    sc = ScenarioConfig.named("A")
    topo = sc.load_topology()
    cfg = sc.sensing()
    x0 = np.random.default_rng(3).uniform(5.0, 40.0, 6)
    w = cfg.eta / cfg.sigma2
    parts, ok = [], True
    for rule in ALL_RULES:
        wr = np.ones(6) if rule is ConsensusRule.AC else w
        final = run_consensus(rule, topo, x0, wr, max_iters=FIXED_ITERS, threshold_db=0.0).final
        target = predicted_limit(rule, wr, x0)
        err = float(np.max(np.abs(final - target)) / abs(target))
        ok &= err <= FIXED_TOL
        parts.append(f"{rule.label} {err:.1e}")
    gap = predicted_limit(ConsensusRule.IWAC, w, x0) - stated_iwac_limit(w, x0)
    return ok, (f"relative errors {', '.join(parts)} (tol {FIXED_TOL:g}); IWAC limit "
                f"sum(w^2 x)/sum(w^2) differs from sum(w x)/sum(w) by {gap:+.4f}")


_ITER_TABLE = {}


def _iteration_table():
    if not _ITER_TABLE:
        from dcss.analysis.convergence import convergence_table
        from dcss.scenario import ScenarioConfig
        t0 = time.perf_counter()
        rep = convergence_table([ScenarioConfig.named("A", su_count=6),
                                 ScenarioConfig.named("A", su_count=10),
                                 ScenarioConfig.named("D", su_count=20)],
                                realizations=ITER_REALIZATIONS, delta_e_db=1.0,
                                max_iters=ITER_MAX_ITERS)
        _ITER_TABLE["report"] = rep
        _ITER_TABLE["seconds"] = time.perf_counter() - t0
    return _ITER_TABLE["report"], _ITER_TABLE["seconds"]


@_record("C4", "Convergence iteration counts")
def check_iteration_counts():
    rep, dt = _iteration_table()
    ok, parts = dt < ITER_MAX_SECONDS, []
    for rule, target in ITER_TARGETS.items():
        c = rep.cell("A", rule, 6)
        tol = max(ITER_ABS, ITER_REL * target)
        hit = not c.overflow and abs(c.mean_iters - target) <= tol
        ok &= hit
        parts.append(f"A-6 {rule} {c.display} (target {target:g}+-{tol:g}) {'ok' if hit else 'MISS'}")
    for rule in ("WAC-AE", "IWAC"):
        c = rep.cell("D", rule, 20)
        ok &= c.display == f">{ITER_MAX_ITERS}"
        parts.append(f"D-20 {rule} {c.display} ({c.frac_unconverged:.0%} unconverged)")
    return ok, "; ".join(parts) + f"; {dt:.1f} s"


def _dominates(a, b, sigmas=ROC_SIGMAS):
    """Smallest margin of ``a >= b`` after allowing ``sigmas`` binomial errors (>= 0 passes)."""
    noise = sigmas * np.sqrt(a.stderr**2 + b.stderr**2)
    return float(np.min(a.pd - b.pd + noise))


@_record("C5", "ROC ordering")
def check_roc_ordering():
    from dcss.analysis.roc import estimate_rocs
    from dcss.scenario import ScenarioConfig
    t0 = time.perf_counter()
    curves = {(n, "A"): estimate_rocs(ScenarioConfig.named("A", su_count=n, trials=ROC_TRIALS))
              for n in (6, 10)}
    curves[(10, "B")] = estimate_rocs(ScenarioConfig.named("B", su_count=10, trials=ROC_TRIALS))
    dt = time.perf_counter() - t0
    ok, parts = dt < ROC_MAX_SECONDS, []
    for n in (6, 10):
        r = curves[(n, "A")]
        checks = {
            "MRC>=WAC": _dominates(r["MRC"], r["WAC"]),
            "WAC>=AC": _dominates(r["WAC"], r["AC"]),
            "OR>=MAJ": _dominates(r["OR"], r["MAJORITY"]),
            "MAJ>=AND": _dominates(r["MAJORITY"], r["AND"]),
        }
        gap = float(np.max(np.abs(r["AC"].pd - r["EGC"].pd)))
        good = all(v >= 0 for v in checks.values()) and gap <= ROC_AC_EGC_TOL
        ok &= good
        bad = [k for k, v in checks.items() if v < 0]
        parts.append(f"A-{n}: |AC-EGC|max {gap:.3f}" + (f", violated {bad}" if bad else ""))
    shift = max(float(np.max(np.abs(curves[(10, "A")][s].pd - curves[(10, "B")][s].pd)))
                for s in curves[(10, "A")])
    ok &= shift < ROC_MOBILITY_TOL
    parts.append(f"B vs A-10 max shift {shift:.3f}")
    return ok, "; ".join(parts) + f"; {dt:.1f} s"


@_record("C6", "Analytic vs simulated local ROC")
def check_local_roc():
    from dcss.analysis.analytic import analytic_local_roc
    from dcss.analysis.roc import simulate_local_roc
    from dcss.scenario import ScenarioConfig
    ok, parts = True, []
    for n in (6, 10):
        sc = ScenarioConfig.named("A", su_count=n, trials=LOCAL_TRIALS)
        mc = simulate_local_roc(sc, "IWAC", LOCAL_K, LOCAL_PF)
        an = analytic_local_roc(sc, LOCAL_K, LOCAL_PF)
        err = max(float(np.max(np.abs(a.pd - m.pd))) for a, m in zip(an, mc))
        ok &= err <= LOCAL_TOL
        parts.append(f"topo{n} max |analytic - MC| = {err:.3f}")
    return ok, f"k = {LOCAL_K}, {LOCAL_TRIALS} trials: " + ", ".join(parts) + f" (tol {LOCAL_TOL})"


@_record("C7", "SLEM consistency")
def check_slem():
    from dcss.analysis.roc import SchemeSetup
    from dcss.analysis.spectral import slem_report
    from dcss.consensus import ALL_RULES
    from dcss.scenario import ScenarioConfig
    setup = SchemeSetup.build(ScenarioConfig.named("A", su_count=10))
    rep = slem_report(ALL_RULES, setup.topology, setup.weights["IWAC"], alpha_frac=0.9)
    conv, _ = _iteration_table()
    labels = [r.label for r in ALL_RULES]
    ts = [rep.by_rule()[lab].t_small for lab in labels]
    emp = [conv.cell("A", lab, 10).mean_iters for lab in labels]
    tau = stats.kendalltau(ts, emp).statistic
    order = lambda v: " < ".join(lab for _, lab in sorted(zip(v, labels)))
    return math.isclose(tau, 1.0), (f"T_small order {order(ts)}; empirical A-10 order {order(emp)}; "
                                    f"Kendall tau = {tau:.2f}")


@_record("C8", "Homogeneous hard-fusion equivalence")
def check_dp_binomial():
    from dcss.fusion import HardRule, binomial_tail, hard_pd_analytic
    worst = 0.0
    for n in range(1, DP_MAX_N + 1):
        for p in np.linspace(0.0, 1.0, 101):
            for k in range(1, n + 1):
                worst = max(worst, abs(hard_pd_analytic([p] * n, HardRule(k, n))
                                       - binomial_tail(p, n, k)))
    return worst <= DP_TOL, f"n <= {DP_MAX_N}, all k, 101 p values: max diff {worst:.1e}"


@_record("C9", "Determinism")
def check_determinism():
    from dcss.cli import main
    cmds = [["roc", "--scenario", "B", "--trials", "1000", "--seed", "5"],
            ["roc", "--scenario", "C", "--trials", "1000", "--weight-mode", "rayleigh-est"],
            ["converge", "--scenario", "D", "--realizations", "100", "--seed", "5"],
            ["slem", "--scenario", "B"]]
    ok, n_files = True, 0
    with tempfile.TemporaryDirectory() as tmp:
        for i, cmd in enumerate(cmds):
            dirs = []
            for j, threads in enumerate(("1", "1", "4")):
                d = Path(tmp) / f"{i}_{j}"
                ok &= main(cmd + ["--threads", threads, "--out", str(d)]) == 0
                dirs.append(d)
            csvs = sorted(p.name for p in dirs[0].glob("*.csv"))
            n_files += len(csvs)
            for d in dirs[1:]:
                match, mismatch, errors = filecmp.cmpfiles(dirs[0], d, csvs, shallow=False)
                ok &= not mismatch and not errors
    return ok, f"{len(cmds)} commands x (rerun, 4 threads), {n_files} CSVs byte-identical: {ok}"


CHECKS = [check_perron_validity, check_conservation, check_fixed_point, check_iteration_counts,
          check_roc_ordering, check_local_roc, check_slem, check_dp_binomial, check_determinism]


def summary_lines():
    return [f"[{'PASS' if RESULTS[c.key][0] else 'FAIL'}] {c.key} {RESULTS[c.key][1]}"
            for c in CHECKS if c.key in RESULTS]


@pytest.mark.parametrize("check", CHECKS, ids=[c.key for c in CHECKS])
def test_criterion(check):
    ok, detail = check()
    assert ok, detail


if __name__ == "__main__":
    for c in CHECKS:
        c()
        print(summary_lines()[-1], flush=True)
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
