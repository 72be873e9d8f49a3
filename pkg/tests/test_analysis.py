import numpy as np
import pytest
from hypothesis import given, strategies as st

from dcss.analysis.analytic import analytic_local_roc, propagate_moments
from dcss.analysis.complexity import (chained_topology, complexity_class, complexity_csv,
                                      complexity_report, time_per_iteration, timing_topology)
from dcss.analysis.convergence import convergence_iterations, convergence_table, example_traces
from dcss.analysis.roc import (SCHEMES, RocCurve, estimate_roc, estimate_rocs, parse_schemes, pava,
                               pd_at_pf, quantile_threshold)
from dcss.analysis.spectral import (expected_gram, expected_perron, slem, slem_report, t_large,
                                    t_small)
from dcss.consensus import ALL_RULES, ConsensusRule, build_perron, default_alpha
from dcss.fusion import gaussian_pd
from dcss.graph import FIXED, LinkFailureModel, Topology, load_topology, sample_edge_mask
from dcss.scenario import ScenarioConfig
from dcss.sensing import H0, H1

SMALL_GRID = (0.05, 0.1, 0.3, 0.5, 0.9, 1.0)


# -- ROC ---------------------------------------------------------------------

@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_pava_monotone_and_mean_preserving(y):
    fit = pava(y)
    assert np.all(np.diff(fit) >= -1e-12)
    assert fit.sum() == pytest.approx(sum(y), abs=1e-9)


def test_pava_oracle():
    np.testing.assert_allclose(pava([1, 3, 2, 4]), [1, 2.5, 2.5, 4])


def test_roc_curve_invariants_and_csv():
    c = RocCurve("X", [0.1, 0.5], [0.4, 0.3], 100)
    assert c.isotonic().pd.tolist() == [0.35, 0.35]
    assert c.to_csv().splitlines()[0] == "pf,pd,stderr"
    with pytest.raises(ValueError):
        RocCurve("X", [0.5, 0.1], [0.1, 0.2], 10)


def test_quantile_threshold_edges():
    h0 = np.arange(100.0)[:, None]
    assert np.isneginf(quantile_threshold(h0, 1.0)).all()
    assert np.isposinf(quantile_threshold(h0, 0.0)).all()
    assert pd_at_pf(np.arange(100.0), np.arange(100.0), 0.2) == pytest.approx(0.2, abs=0.011)


def test_scheme_parsing():
    assert parse_schemes("all") == list(SCHEMES)
    assert parse_schemes("wac-ae,mrc,MRC") == ["WAC_AE", "MRC"]
    with pytest.raises(ValueError):
        parse_schemes("foo")


def test_pf_one_gives_pd_one():
    sc = ScenarioConfig.named("A", trials=300)
    for c in estimate_rocs(sc, "all", SMALL_GRID).values():
        assert c.pd[-1] == 1.0
        assert np.all((c.pd >= 0) & (c.pd <= 1))


def test_single_scheme_matches_joint_run():
    sc = ScenarioConfig.named("B", trials=300, seed=4)
    joint = estimate_rocs(sc, ["IWAC", "EGC", "OR"], SMALL_GRID)
    for s in ("IWAC", "OR"):
        np.testing.assert_array_equal(estimate_roc(s, sc, SMALL_GRID).pd, joint[s].pd)


def test_frozen_centralized_snapshot():
    # computed once from seed 3 and frozen
    sc = ScenarioConfig.named("A", trials=512, seed=3)
    r = estimate_rocs(sc, ["EGC", "MRC", "OR", "AND"], [0.1, 0.3, 0.6])
    assert r["EGC"].pd.tolist() == [0.826171875, 0.94921875, 0.9921875]
    assert r["MRC"].pd.tolist() == [0.91015625, 0.974609375, 0.994140625]
    assert r["OR"].pd.tolist() == [0.96875, 1.0, 1.0]
    assert r["AND"].pd.tolist() == [0.0, 0.0390625, 0.2578125]


def test_roc_independent_of_threads():
    base = ScenarioConfig.named("D", trials=600, seed=9)
    a = estimate_rocs(base.replace(threads=1), ["WAC", "MAJORITY"], SMALL_GRID)
    b = estimate_rocs(base.replace(threads=4), ["WAC", "MAJORITY"], SMALL_GRID)
    for s in a:
        assert a[s].to_csv() == b[s].to_csv()


def test_rayleigh_est_and_global_axis_run():
    sc = ScenarioConfig.named("C", trials=300, weight_mode="rayleigh-est", hard_pf_axis="global")
    r = estimate_rocs(sc, ["IWAC", "AND"], SMALL_GRID)
    assert r["AND"].pd[-1] == 1.0 and r["IWAC"].trials == 300


# -- analytic local ROC --------------------------------------------------------

def test_propagate_moments_oracle():
    P = np.array([[0.5, 0.5], [0.25, 0.75]])
    mean, cov = propagate_moments(P, 1, [2.0, 4.0], [1.0, 2.0])
    np.testing.assert_allclose(mean, [3.0, 3.5])
    np.testing.assert_allclose(cov, P @ np.diag([1.0, 2.0]) @ P.T)


def test_analytic_k0_is_single_su_roc():
    sc = ScenarioConfig.named("A")
    cfg = sc.sensing()
    grid = np.array(SMALL_GRID)
    m0, v0 = cfg.moments(H0)
    m1, v1 = cfg.moments(H1)
    for i, c in enumerate(analytic_local_roc(sc, 0, grid)):
        np.testing.assert_allclose(c.pd, gaussian_pd(grid, m0[i], v0[i], m1[i], v1[i]))


def test_analytic_large_k_curves_coincide():
    curves = analytic_local_roc(ScenarioConfig.named("A", su_count=10), 3000, SMALL_GRID)
    ref = curves[0].pd
    for c in curves[1:]:
        np.testing.assert_allclose(c.pd, ref, atol=1e-9)


def test_analytic_rejects_dynamic():
    with pytest.raises(ValueError):
        analytic_local_roc(ScenarioConfig.named("B"), 10)


def test_analytic_single_index():
    c = analytic_local_roc(ScenarioConfig.named("A"), 5, SMALL_GRID, su_index=2)
    assert isinstance(c, RocCurve) and c.scheme == "IWAC@su2"


# -- convergence -----------------------------------------------------------------

def test_two_node_ac_exactly_one_iteration(tmp_path):
    p = tmp_path / "pair.txt"
    p.write_text("2\n0 1\n")
    sc = ScenarioConfig(su_count=2, topology=str(p), alpha_frac=0.5, realizations=40)
    its = convergence_iterations(sc, ["AC"])
    assert (its == 1).any()
    # a 0 appears only when the two initial statistics already agree within 1 dB
    assert set(np.unique(its)) <= {0, 1}


def test_single_node_zero_iterations(tmp_path):
    p = tmp_path / "one.txt"
    p.write_text("1\n")
    sc = ScenarioConfig(su_count=1, topology=str(p), realizations=5)
    assert (convergence_iterations(sc, ["AC"]) == 0).all()


def test_convergence_report_format_and_sentinel():
    sc = ScenarioConfig.named("D", su_count=20, realizations=64)
    rep = convergence_table([sc], ALL_RULES, max_iters=5)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "scenario,rule,n_su,mean_iters,frac_unconverged"
    assert lines[4].startswith("D,IWAC,20,>5,")
    cell = rep.cell("D", "iwac", 20)
    assert cell.overflow and cell.display == ">5"
    assert rep.to_dict()["rows"][0]["realizations"] == 64


def test_convergence_thread_invariance():
    sc = ScenarioConfig.named("B", realizations=150, seed=2)
    a = convergence_table([sc.replace(threads=1)]).to_csv()
    b = convergence_table([sc.replace(threads=3)]).to_csv()
    assert a == b


def test_example_traces_match_first_realization():
    sc = ScenarioConfig.named("B", realizations=1, seed=11)
    its = convergence_iterations(sc)
    traces = example_traces(sc)
    for j, rule in enumerate(ALL_RULES):
        k = traces[rule.value].iterations_to_converge
        assert its[0, j] == (sc.max_iters + 1 if k is None else k)


# -- spectral ----------------------------------------------------------------

def test_slem_two_node_complete():
    t = Topology.complete(2)
    P = build_perron(ConsensusRule.AC, t, None, 0.5).P
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(P).real), [0.0, 1.0], atol=1e-15)
    rep = slem_report(["AC"], t, np.ones(2), alpha=0.5)
    assert rep.rows[0].rho2 == pytest.approx(0.0, abs=1e-15)
    assert rep.rows[0].t_small == 0.0


@pytest.mark.parametrize("rule", ALL_RULES)
def test_expected_perron_fixed_equals_p(rule):
    t = load_topology("topo10")
    w = np.linspace(1, 10, 10)
    a = default_alpha(rule, t, w)
    np.testing.assert_allclose(expected_perron(rule, t, w, a, FIXED), build_perron(rule, t, w, a).P,
                               atol=1e-14)
    P = build_perron(rule, t, w, a).P
    np.testing.assert_allclose(expected_gram(rule, t, w, a, FIXED), P.T @ P, atol=1e-12)


@pytest.mark.parametrize("rule", [ConsensusRule.AC, ConsensusRule.IWAC])
def test_expected_gram_matches_sampling(rule):
    t = load_topology("topo6")
    w = np.array([1.0, 2.0, 4.0, 8.0, 3.0, 5.0])
    a = default_alpha(rule, t, w)
    model = LinkFailureModel(0.6)
    masks = sample_edge_mask(t, model, np.random.default_rng(0), size=20000)
    acc = np.zeros((6, 6))
    accp = np.zeros((6, 6))
    for m in masks:
        sub = Topology(6, tuple(e for e, k in zip(t.edges, m) if k))
        P = build_perron(rule, sub, w, a, check=False).P
        acc += P.T @ P
        accp += P
    np.testing.assert_allclose(acc / len(masks), expected_gram(rule, t, w, a, model), atol=5e-3)
    np.testing.assert_allclose(accp / len(masks), expected_perron(rule, t, w, a, model), atol=5e-3)


def test_time_formulas():
    assert t_small(0.0) == 0.0 and np.isinf(t_small(1.0))
    assert t_small(np.exp(-1)) == pytest.approx(1.0)
    assert t_large(0.5, 10) == pytest.approx(2 * np.log(10))
    assert slem(np.eye(1)) == 0.0


def test_slem_in_unit_interval_and_csv():
    t = load_topology("topo10")
    rep = slem_report(ALL_RULES, t, np.linspace(1, 10, 10), LinkFailureModel(0.6))
    for r in rep.rows:
        assert 0 <= r.rho2 < 1 and 0 <= r.rho2_gram < 1
    assert rep.to_csv().splitlines()[0] == "rule,rho2,t_small,t_large"
    assert set(rep.by_rule()) == {"AC", "WAC", "WAC-AE", "IWAC"}


# -- complexity ---------------------------------------------------------------

def test_complexity_classes():
    assert complexity_class("AC") == "O(KN)"
    assert complexity_class(ConsensusRule.IWAC) == "O(KN^2)"
    csv_text = complexity_csv(complexity_report())
    assert csv_text.splitlines() == ["rule,complexity", "AC,O(KN)", "WAC,O(KN^2)",
                                     "WAC-AE,O(KN^2)", "IWAC,O(KN^2)"]


def test_timing_topologies():
    t40 = chained_topology(4)
    assert t40.n == 40 and t40.is_connected() and len(t40.edges) == 4 * 12 + 3
    assert [timing_topology(n).n for n in (6, 10, 20, 40)] == [6, 10, 20, 40]
    with pytest.raises(ValueError):
        timing_topology(7)


def test_iwac_time_grows_superlinearly():
    t = {n: time_per_iteration("IWAC", timing_topology(n), iters=100, repeats=5) for n in (10, 40)}
    # quadrupling N must cost well over 4x for an O(N^2) step
    assert t[40] / t[10] > 6.0
