"""Iterations to reach the dB-spread convergence criterion, averaged over realizations.

Each realization draws fresh SU placements (per-SU SNRs uniform over the
scenario range unless ``snr_assignment`` is set), fresh H1 statistics and,
for dynamic networks, fresh link failures shared by all rules.  Step sizes
are recomputed per realization from its weights.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import rng as rngmod
from ..consensus import ALL_RULES, ConsensusRule, compute_weights, run_consensus, run_consensus_batch
from ..scenario import ScenarioConfig
from ..sensing import H1, sample_statistics
from .roc import _finite_bound

REALIZATION_BLOCK = 64


@dataclass
class ConvergenceCell:
    scenario: str
    rule: str
    n_su: int
    channel: str
    network: str
    realizations: int
    max_iters: int
    iterations: np.ndarray  # censored at max_iters + 1

    @property
    def frac_unconverged(self) -> float:
        return float(np.mean(self.iterations > self.max_iters))

    @property
    def overflow(self) -> bool:
        """More than half the realizations missed the cap (median beyond it)."""
        return self.frac_unconverged > 0.5

    @property
    def mean_iters(self) -> float:
        return float(np.mean(self.iterations))

    @property
    def display(self) -> str:
        return f">{self.max_iters}" if self.overflow else f"{self.mean_iters:.2f}"


@dataclass
class ConvergenceReport:
    cells: list[ConvergenceCell]
    delta_e_db: float

    def cell(self, scenario: str, rule: str, n_su: int | None = None) -> ConvergenceCell:
        label = ConsensusRule.parse(rule).label
        for c in self.cells:
            if c.scenario == scenario and c.rule == label and (n_su is None or c.n_su == n_su):
                return c
        raise KeyError((scenario, rule, n_su))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["scenario", "rule", "n_su", "mean_iters", "frac_unconverged"])
        for c in self.cells:
            wr.writerow([c.scenario, c.rule, c.n_su, c.display, f"{c.frac_unconverged:.6g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"delta_e_db": self.delta_e_db, "rows": [
            {"scenario": c.scenario, "rule": c.rule, "n_su": c.n_su, "channel": c.channel,
             "network": c.network, "realizations": c.realizations, "max_iters": c.max_iters,
             "mean_iters": c.display, "censored_mean": round(c.mean_iters, 10),
             "frac_unconverged": round(c.frac_unconverged, 10)} for c in self.cells]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def draw_realization(scenario: ScenarioConfig, rng: np.random.Generator):
    """One channel realization: sensing config, H1 statistics and a weight history."""
    mode = scenario.snr_assignment or "random"
    cfg = scenario.sensing(scenario.snr_db(mode, rng))
    x0 = sample_statistics(cfg, H1, rng, 1)[0]
    history = None
    if scenario.weight_mode == "rayleigh-est":
        history = sample_statistics(cfg, H1, rng, scenario.window)
    return cfg, x0, history


def _rule_params(scenario, topo, rule, cfg, history):
    w = compute_weights(rule, cfg, scenario.weight_mode, history, scenario.window)
    return w, scenario.alpha_frac * _finite_bound(rule, topo, w)


def _block(scenario, topo, rules, max_iters, delta_e_db, blk):
    b, start, stop = blk
    rs = rngmod.stream(scenario.seed, "converge", b)
    out = np.empty((stop - start, len(rules)), dtype=np.int64)
    for r in range(stop - start):
        cfg, x0, history = draw_realization(scenario, rs)
        for j, rule in enumerate(rules):
            w, alpha = _rule_params(scenario, topo, rule, cfg, history)
            res = run_consensus_batch(rule, topo, x0[None, :], w, alpha, max_iters, delta_e_db,
                                      scenario.link_model,
                                      rngmod.stream(scenario.seed, "converge-links", start + r),
                                      stop_at_convergence=True)
            out[r, j] = res.iterations(max_iters)[0]
    return out


def convergence_iterations(scenario: ScenarioConfig, rules=ALL_RULES, realizations=None,
                           delta_e_db=None, max_iters=None) -> np.ndarray:
    """``(realizations, rules)`` iteration counts, censored at ``max_iters + 1``."""
    rules = [ConsensusRule.parse(r) if isinstance(r, str) else r for r in rules]
    n_real = scenario.realizations if realizations is None else int(realizations)
    thr = scenario.delta_e_db if delta_e_db is None else float(delta_e_db)
    kmax = scenario.max_iters if max_iters is None else int(max_iters)
    topo = scenario.load_topology()
    blist = rngmod.blocks(n_real, REALIZATION_BLOCK)
    with ThreadPoolExecutor(max_workers=scenario.threads) as ex:
        parts = list(ex.map(lambda blk: _block(scenario, topo, rules, kmax, thr, blk), blist))
    return np.concatenate(parts, axis=0)


def convergence_table(scenarios, rules=ALL_RULES, realizations=None, delta_e_db=None,
                      max_iters=None) -> ConvergenceReport:
    """Mean iterations per (scenario, rule); unset arguments come from each scenario."""
    if isinstance(scenarios, ScenarioConfig):
        scenarios = [scenarios]
    rules = [ConsensusRule.parse(r) if isinstance(r, str) else r for r in rules]
    cells = []
    thr = None
    for sc in scenarios:
        kmax = sc.max_iters if max_iters is None else int(max_iters)
        thr = sc.delta_e_db if delta_e_db is None else float(delta_e_db)
        its = convergence_iterations(sc, rules, realizations, thr, kmax)
        for j, rule in enumerate(rules):
            cells.append(ConvergenceCell(sc.name, rule.label, sc.su_count, sc.channel, sc.network,
                                         its.shape[0], kmax, its[:, j]))
    return ConvergenceReport(cells, thr if thr is not None else 1.0)


def example_traces(scenario: ScenarioConfig, rules=ALL_RULES, max_iters=None, delta_e_db=None):
    """Full state traces for the first realization of :func:`convergence_iterations`."""
    rules = [ConsensusRule.parse(r) if isinstance(r, str) else r for r in rules]
    kmax = scenario.max_iters if max_iters is None else int(max_iters)
    thr = scenario.delta_e_db if delta_e_db is None else float(delta_e_db)
    topo = scenario.load_topology()
    cfg, x0, history = draw_realization(scenario, rngmod.stream(scenario.seed, "converge", 0))
    traces = {}
    for rule in rules:
        w, alpha = _rule_params(scenario, topo, rule, cfg, history)
        traces[rule.value] = run_consensus(rule, topo, x0, w, alpha, kmax, thr, scenario.link_model,
                                           rngmod.stream(scenario.seed, "converge-links", 0))
    return traces
