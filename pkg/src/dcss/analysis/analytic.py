"""Gaussian-approximation local ROC of a consensus rule on a fixed network."""
from __future__ import annotations

import numpy as np

from ..consensus import ConsensusRule, build_perron
from ..fusion import gaussian_pd
from ..sensing import H0, H1
from .roc import RocCurve, SchemeSetup


def propagate_moments(P: np.ndarray, k: int, mean0, var0):
    """Mean and covariance of ``P^k x`` for independent entries of ``x``.

    ``cov(P^k x) = P^k diag(var) (P^k)^T``.
    """
    Pk = np.linalg.matrix_power(P, int(k))
    mean = Pk @ np.asarray(mean0, dtype=float)
    cov = (Pk * np.asarray(var0, dtype=float)[None, :]) @ Pk.T
    return mean, cov


def local_roc_moments(P: np.ndarray, k: int, sensing):
    m0, v0 = sensing.moments(H0)
    m1, v1 = sensing.moments(H1)
    mean0, cov0 = propagate_moments(P, k, m0, v0)
    mean1, cov1 = propagate_moments(P, k, m1, v1)
    return (mean0, np.diag(cov0)), (mean1, np.diag(cov1))


def analytic_local_roc(scenario, k_iterations: int, pf_grid=None, su_index: int | None = None,
                       rule: str = "IWAC", setup: SchemeSetup | None = None):
    """Analytic per-SU ROC after ``k_iterations`` steps of ``rule``.

    Returns a list of curves (one per SU) or a single curve for ``su_index``.

    Raises:
        ValueError: for dynamic networks, where the Perron product is random.
    """
    if scenario.network != "fixed" or scenario.pr_fail != 0.0:
        raise ValueError("analytic local ROC requires a fixed network")
    rule = ConsensusRule.parse(rule)
    setup = setup or SchemeSetup.build(scenario, rules=(rule.value,))
    grid = np.asarray(scenario.pf_grid if pf_grid is None else pf_grid, dtype=float)
    P = build_perron(rule, setup.topology, setup.weights[rule.value], setup.alphas[rule.value]).P
    (mu0, var0), (mu1, var1) = local_roc_moments(P, k_iterations, setup.sensing)
    idx = range(len(mu0)) if su_index is None else [su_index]
    curves = [RocCurve(f"{rule.value}@su{i}", grid,
                       gaussian_pd(grid, mu0[i], var0[i], mu1[i], var1[i]), 0, np.zeros(grid.size))
              for i in idx]
    return curves if su_index is None else curves[0]
