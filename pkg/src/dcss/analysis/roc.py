"""Monte-Carlo ROC estimation for the nine sensing schemes.

Thresholds are calibrated from simulated H0 statistics (empirical quantiles)
for every scheme, then detection rates are measured on independent H1
trials.  All schemes of a run see the same signal and link realizations.

Consensus decisions are taken once the states agree to within
``roc_delta_e_db`` (or at ``roc_max_iters``).  Hard-rule curves sweep the
common per-SU false-alarm rate by default (``hard_pf_axis="local"``); with
``"global"`` the local rate is solved so the fused rate equals the grid value.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import rng as rngmod
from ..consensus import ConsensusRule, compute_weights, max_step_size, run_consensus_batch
from ..fusion import HardRule, egc_weights, hard_decide, local_pf_for_global, mrc_weights, soft_statistic
from ..scenario import ScenarioConfig
from ..sensing import H0, H1, sample_statistics

CONSENSUS_SCHEMES = ("AC", "WAC", "WAC_AE", "IWAC")
SOFT_SCHEMES = ("EGC", "MRC")
HARD_SCHEMES = ("OR", "AND", "MAJORITY")
SCHEMES = CONSENSUS_SCHEMES + SOFT_SCHEMES + HARD_SCHEMES


def parse_scheme(name: str) -> str:
    key = name.strip().upper().replace("-", "_")
    if key not in SCHEMES:
        raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
    return key


def parse_schemes(spec) -> list[str]:
    if isinstance(spec, str):
        spec = [s for s in spec.split(",") if s.strip()]
    out = []
    for s in spec:
        if s.strip().lower() == "all":
            out.extend(x for x in SCHEMES if x not in out)
        else:
            k = parse_scheme(s)
            if k not in out:
                out.append(k)
    return out


def pava(y, w=None) -> np.ndarray:
    """Nondecreasing least-squares fit (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    vals, wts, sizes = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        sizes.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            tw = wts[-2] + wts[-1]
            v = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / tw
            s = sizes[-2] + sizes[-1]
            del vals[-1], wts[-1], sizes[-1]
            vals[-1], wts[-1], sizes[-1] = v, tw, s
    return np.repeat(vals, sizes)


@dataclass
class RocCurve:
    scheme: str
    pf: np.ndarray
    pd: np.ndarray
    trials: int
    stderr: np.ndarray = field(default=None)

    def __post_init__(self):
        self.pf = np.asarray(self.pf, dtype=float)
        self.pd = np.asarray(self.pd, dtype=float)
        if self.stderr is None:
            self.stderr = np.sqrt(self.pd * (1.0 - self.pd) / max(self.trials, 1))
        if np.any(np.diff(self.pf) <= 0):
            raise ValueError("pf must be strictly increasing")

    def isotonic(self) -> "RocCurve":
        return RocCurve(self.scheme, self.pf, pava(self.pd), self.trials, self.stderr)

    def at(self, pf) -> np.ndarray:
        return np.interp(pf, self.pf, self.pd)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["pf", "pd", "stderr"])
        for a, b, c in zip(self.pf, self.pd, self.stderr):
            wr.writerow([f"{a:.10g}", f"{b:.10g}", f"{c:.10g}"])
        return buf.getvalue()


def quantile_threshold(h0, pf: float):
    """Per-column threshold whose empirical H0 exceedance rate is ``pf``."""
    h0 = np.asarray(h0, dtype=float)
    shape = h0.shape[1:]
    if pf >= 1.0:
        return np.full(shape, -np.inf) if shape else -np.inf
    if pf <= 0.0:
        return np.full(shape, np.inf) if shape else np.inf
    return np.quantile(h0, 1.0 - pf, axis=0)


def pd_at_pf(h0, h1, pf: float) -> float:
    """Detection rate at calibrated false-alarm ``pf``; columns are averaged."""
    lam = quantile_threshold(h0, pf)
    return float(np.mean(np.asarray(h1) > lam))


def hard_pd_at_pf(t0, t1, rule: HardRule, pf: float, axis: str = "local") -> float:
    pf_loc = pf if axis == "local" else local_pf_for_global(pf, rule)
    lam = quantile_threshold(t0, pf_loc)
    return float(np.mean(hard_decide(t1 > lam, rule)))


@dataclass
class SchemeSetup:
    """Scenario-level quantities shared by every block of a run."""

    scenario: ScenarioConfig
    topology: object
    sensing: object
    weights: dict
    alphas: dict

    @classmethod
    def build(cls, scenario: ScenarioConfig, rules=CONSENSUS_SCHEMES) -> "SchemeSetup":
        topo = scenario.load_topology()
        snr_mode = scenario.snr_assignment or "even"
        snr = scenario.snr_db(snr_mode, rngmod.stream(scenario.seed, "snr"))
        cfg = scenario.sensing(snr)
        history = None
        if scenario.weight_mode == "rayleigh-est":
            history = sample_statistics(cfg, H1, rngmod.stream(scenario.seed, "weights"),
                                        scenario.window)
        weights, alphas = {}, {}
        for name in rules:
            rule = ConsensusRule.parse(name)
            w = compute_weights(rule, cfg, scenario.weight_mode, history, scenario.window)
            weights[rule.value] = w
            alphas[rule.value] = scenario.alpha_frac * _finite_bound(rule, topo, w)
        return cls(scenario, topo, cfg, weights, alphas)


def _finite_bound(rule, topo, w) -> float:
    b = max_step_size(rule, topo, w)
    return b if np.isfinite(b) else 1.0


def _run_rule(setup: SchemeSetup, rule_name: str, x0, hyp: int, block: int, iters=None,
              stop=True):
    sc = setup.scenario
    rule = ConsensusRule.parse(rule_name)
    link_rng = rngmod.stream(sc.seed, "links", hyp, block)
    return run_consensus_batch(rule, setup.topology, x0, setup.weights[rule.value],
                               setup.alphas[rule.value],
                               sc.roc_max_iters if iters is None else iters, sc.roc_delta_e_db,
                               sc.link_model, link_rng, stop_at_convergence=stop)


def _block_worker(setup: SchemeSetup, schemes, b: int, start: int, stop: int):
    sc = setup.scenario
    m = stop - start
    rs = rngmod.stream(sc.seed, "stats", b)
    t0 = sample_statistics(setup.sensing, H0, rs, m)
    t1 = sample_statistics(setup.sensing, H1, rs, m)
    out = {H0: {"T": t0}, H1: {"T": t1}}
    n = setup.sensing.n_su
    for hyp, t in ((H0, t0), (H1, t1)):
        for s in schemes:
            if s == "EGC":
                out[hyp][s] = soft_statistic(t, egc_weights(n))
            elif s == "MRC":
                out[hyp][s] = soft_statistic(t, mrc_weights(setup.sensing))
            elif s in CONSENSUS_SCHEMES:
                out[hyp][s] = _run_rule(setup, s, t, hyp, b).states
    return out


def simulate_statistics(scenario: ScenarioConfig, schemes=SCHEMES, setup: SchemeSetup | None = None):
    """Decision statistics per hypothesis and scheme, stacked over all trials."""
    schemes = parse_schemes(schemes)
    setup = setup or SchemeSetup.build(scenario)
    blist = rngmod.blocks(scenario.trials)
    with ThreadPoolExecutor(max_workers=scenario.threads) as ex:
        parts = list(ex.map(lambda blk: _block_worker(setup, schemes, *blk), blist))
    stats = {}
    for hyp in (H0, H1):
        keys = parts[0][hyp].keys()
        stats[hyp] = {k: np.concatenate([p[hyp][k] for p in parts], axis=0) for k in keys}
    return stats, setup


def roc_from_statistics(scheme: str, stats, pf_grid, n_su: int, hard_axis: str = "local") -> RocCurve:
    pf_grid = np.asarray(pf_grid, dtype=float)
    if scheme in HARD_SCHEMES:
        rule = HardRule.named(scheme, n_su)
        t0, t1 = stats[H0]["T"], stats[H1]["T"]
        pd = [hard_pd_at_pf(t0, t1, rule, p, hard_axis) for p in pf_grid]
    else:
        h0, h1 = stats[H0][scheme], stats[H1][scheme]
        pd = [pd_at_pf(h0, h1, p) for p in pf_grid]
    trials = stats[H1]["T"].shape[0]
    return RocCurve(scheme, pf_grid, np.array(pd), trials)


def estimate_rocs(scenario: ScenarioConfig, schemes=SCHEMES, pf_grid=None) -> dict[str, RocCurve]:
    schemes = parse_schemes(schemes)
    grid = scenario.pf_grid if pf_grid is None else pf_grid
    stats, setup = simulate_statistics(scenario, schemes)
    return {s: roc_from_statistics(s, stats, grid, setup.sensing.n_su, scenario.hard_pf_axis)
            for s in schemes}


def estimate_roc(scheme: str, scenario: ScenarioConfig, pf_grid=None, trials=None, seed=None) -> RocCurve:
    """ROC of one scheme; identical to the same scheme within :func:`estimate_rocs`."""
    changes = {}
    if trials is not None:
        changes["trials"] = int(trials)
    if seed is not None:
        changes["seed"] = int(seed)
    sc = scenario.replace(**changes) if changes else scenario
    scheme = parse_scheme(scheme)
    return estimate_rocs(sc, [scheme], pf_grid)[scheme]


def simulate_local_states(scenario: ScenarioConfig, rule: str, k_iterations: int,
                          setup: SchemeSetup | None = None):
    """Per-SU consensus states after exactly ``k_iterations`` steps, both hypotheses."""
    setup = setup or SchemeSetup.build(scenario)
    rule = ConsensusRule.parse(rule).value

    def work(blk):
        b, start, stop = blk
        rs = rngmod.stream(scenario.seed, "stats", b)
        t0 = sample_statistics(setup.sensing, H0, rs, stop - start)
        t1 = sample_statistics(setup.sensing, H1, rs, stop - start)
        return tuple(_run_rule(setup, rule, t, hyp, b, iters=k_iterations, stop=False).states
                     for hyp, t in ((H0, t0), (H1, t1)))

    with ThreadPoolExecutor(max_workers=scenario.threads) as ex:
        parts = list(ex.map(work, rngmod.blocks(scenario.trials)))
    x0 = np.concatenate([p[0] for p in parts])
    x1 = np.concatenate([p[1] for p in parts])
    return x0, x1, setup


def simulate_local_roc(scenario: ScenarioConfig, rule: str, k_iterations: int, pf_grid=None):
    """Monte-Carlo local ROC of every SU after ``k_iterations`` consensus steps."""
    grid = np.asarray(scenario.pf_grid if pf_grid is None else pf_grid, dtype=float)
    x0, x1, _ = simulate_local_states(scenario, rule, k_iterations)
    curves = []
    for i in range(x0.shape[1]):
        pd = [pd_at_pf(x0[:, i], x1[:, i], p) for p in grid]
        curves.append(RocCurve(f"{rule}@su{i}", grid, np.array(pd), x1.shape[0]))
    return curves
