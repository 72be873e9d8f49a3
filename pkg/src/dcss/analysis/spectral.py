"""Second-largest eigenvalue modulus (SLEM) and the derived convergence times."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ..consensus import ConsensusRule, edge_coefficients, max_step_size
from ..graph import FIXED, LinkFailureModel, Topology, build_laplacian


def slem(matrix: np.ndarray) -> float:
    """Second-largest eigenvalue modulus."""
    if matrix.shape[0] < 2:
        return 0.0
    if np.allclose(matrix, matrix.T):
        mods = np.sort(np.abs(np.linalg.eigvalsh(matrix)))[::-1]
    else:
        mods = np.sort(np.abs(np.linalg.eigvals(matrix)))[::-1]
    return float(mods[1])


def _edge_generators(rule, topology: Topology, weights):
    """Per-edge contributions ``M_e`` with ``M = sum_e M_e`` (step size excluded)."""
    ei, ej, ci, cj = edge_coefficients(rule, topology, weights, 1.0)
    n = topology.n
    out = []
    for a, b, c1, c2 in zip(ei, ej, ci, cj):
        m = np.zeros((n, n))
        m[a, a], m[a, b] = c1, -c1
        m[b, b], m[b, a] = c2, -c2
        out.append(m)
    return out


def expected_perron(rule, topology: Topology, weights, alpha: float,
                    link_model: LinkFailureModel = FIXED) -> np.ndarray:
    """``E[P]`` under independent link survival."""
    build_laplacian(topology)
    p = link_model.pr_connection
    m = sum(_edge_generators(rule, topology, weights), np.zeros((topology.n, topology.n)))
    return np.eye(topology.n) - alpha * p * m


def expected_gram(rule, topology: Topology, weights, alpha: float,
                  link_model: LinkFailureModel = FIXED) -> np.ndarray:
    """``E[P^T P]``, exact for independent Bernoulli links."""
    p = link_model.pr_connection
    gens = _edge_generators(rule, topology, weights)
    n = topology.n
    em = p * sum(gens, np.zeros((n, n)))
    second = em.T @ em + p * (1.0 - p) * sum((g.T @ g for g in gens), np.zeros((n, n)))
    return np.eye(n) - alpha * (em + em.T) + alpha**2 * second


def t_small(rho2: float) -> float:
    if rho2 <= 0.0:
        return 0.0
    if rho2 >= 1.0:
        return math.inf
    return 1.0 / math.log(1.0 / rho2)


def t_large(rho2: float, n: int) -> float:
    if rho2 >= 1.0:
        return math.inf
    return math.log(n) / (1.0 - rho2)


@dataclass
class SlemRow:
    rule: str
    alpha: float
    rho2: float
    rho2_gram: float
    t_small: float
    t_large: float


@dataclass
class SlemReport:
    rows: list[SlemRow]
    topology: str
    pr_connection: float

    def by_rule(self) -> dict[str, SlemRow]:
        return {r.rule: r for r in self.rows}

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["rule", "rho2", "t_small", "t_large"])
        for r in self.rows:
            wr.writerow([r.rule, f"{r.rho2:.10g}", f"{r.t_small:.10g}", f"{r.t_large:.10g}"])
        return buf.getvalue()


def slem_report(rules, topology: Topology, weights, link_model: LinkFailureModel = FIXED,
                alpha=None, alpha_frac: float = 0.9) -> SlemReport:
    """SLEM of ``E[P]`` and ``E[P^T P]`` for each rule.

    ``alpha`` may be a float shared by all rules, a dict keyed by rule value,
    or None for ``alpha_frac`` times each rule's bound.  The gram-matrix SLEM of
    a non-symmetric ``P`` is reported as computed; only for AC is the top
    eigenvalue exactly one.
    """
    rows = []
    for r in rules:
        rule = ConsensusRule.parse(r) if isinstance(r, str) else r
        w = np.ones(topology.n) if rule is ConsensusRule.AC else np.asarray(weights, dtype=float)
        if alpha is None:
            a = alpha_frac * max_step_size(rule, topology, w)
        elif isinstance(alpha, dict):
            a = alpha[rule.value]
        else:
            a = float(alpha)
        rho = slem(expected_perron(rule, topology, w, a, link_model))
        rho_g = slem(expected_gram(rule, topology, w, a, link_model))
        rows.append(SlemRow(rule.label, a, rho, rho_g, t_small(rho), t_large(rho_g, topology.n)))
    return SlemReport(rows, topology.name, link_model.pr_connection)
