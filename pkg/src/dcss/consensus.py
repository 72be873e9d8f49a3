"""Distributed consensus fusion rules: AC, WAC, WAC-AE and IWAC.

Every rule is a Perron iteration ``x(k+1) = P(k) x(k)`` with
``P = I - alpha * M`` where ``M`` is a (possibly weighted) Laplacian:

========  ==========================
rule      M
========  ==========================
AC        L
WAC       inv(Delta) L
WAC-AE    L_ae
IWAC      inv(Delta) L_ae
========  ==========================

``L_ae`` has off-diagonal ``-w_j`` for each neighbour ``j`` and diagonal
``sum_{j in N_i} w_j``; ``Delta = diag(w)``.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import FIXED, LinkFailureModel, Topology, build_laplacian, sample_edge_mask
from .sensing import SensingConfig

WEIGHT_EPS = 1e-6
DEFAULT_ALPHA_FRACTION = 0.9


class ConsensusError(RuntimeError):
    """Numerical failure during a consensus run."""


class ConsensusRule(str, enum.Enum):
    AC = "AC"
    WAC = "WAC"
    WAC_AE = "WAC_AE"
    IWAC = "IWAC"

    @classmethod
    def parse(cls, name: str) -> "ConsensusRule":
        key = name.strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown consensus rule {name!r}") from None

    @property
    def label(self) -> str:
        return self.value.replace("_", "-")

    @property
    def scales_by_own_weight(self) -> bool:
        return self in (ConsensusRule.WAC, ConsensusRule.IWAC)

    @property
    def uses_neighbor_weights(self) -> bool:
        return self in (ConsensusRule.WAC_AE, ConsensusRule.IWAC)


ALL_RULES = tuple(ConsensusRule)


# -- weights -----------------------------------------------------------------

def estimate_snr_weights(history, n_samples: int, window: int, eps: float = WEIGHT_EPS) -> np.ndarray:
    """Windowed SNR estimate ``(1/2l) sum (T_{i,p} - 2 N_s)`` over the last ``window`` rows.

    ``history`` has shape ``(measurements, n_su)``, most recent last.  Values
    below ``eps`` are clamped so the weight matrix stays invertible; pass
    ``eps=None`` for the raw estimate.
    """
    h = np.atleast_2d(np.asarray(history, dtype=float))
    if h.shape[0] == 0:
        raise ValueError("estimator mode needs at least one past measurement")
    if window < 1:
        raise ValueError("window must be >= 1")
    recent = h[-window:]
    w = (recent - 2.0 * n_samples).sum(axis=0) / (2.0 * window)
    return w if eps is None else np.maximum(w, eps)


def compute_weights(rule: ConsensusRule, config: SensingConfig, mode: str = "awgn",
                    history=None, window: int = 10, eps: float = WEIGHT_EPS) -> np.ndarray:
    """Per-SU consensus weights.

    ``mode`` is ``awgn`` (deflection-optimal ``eta_i / sigma_i^2``),
    ``rayleigh-oracle`` (the same expression with the average SNR) or
    ``rayleigh-est`` (windowed estimate from ``history``).  AC ignores weights.
    """
    rule = ConsensusRule.parse(rule) if isinstance(rule, str) else rule
    if rule is ConsensusRule.AC:
        return np.ones(config.n_su)
    if mode in ("awgn", "rayleigh-oracle"):
        w = config.eta / config.sigma2
    elif mode == "rayleigh-est":
        if history is None:
            raise ValueError("rayleigh-est weights need a measurement history")
        return estimate_snr_weights(history, config.n_samples, window, eps)
    else:
        raise ValueError(f"unknown weight mode {mode!r}")
    return np.maximum(w, eps)


# -- Perron matrices -----------------------------------------------------------

def weighted_laplacian(topology: Topology, weights) -> np.ndarray:
    """``L_ae``: neighbour-weighted Laplacian with rows summing to zero."""
    w = np.asarray(weights, dtype=float)
    gw = topology.adjacency * w[None, :]
    return np.diag(gw.sum(axis=1)) - gw


def _laplacian_any(topology: Topology) -> np.ndarray:
    g = topology.adjacency.astype(float)
    return np.diag(g.sum(axis=1)) - g


def iteration_generator(rule: ConsensusRule, topology: Topology, weights) -> np.ndarray:
    """The matrix ``M`` with ``P = I - alpha M`` (no connectivity check)."""
    w = np.asarray(weights, dtype=float)
    if rule.uses_neighbor_weights:
        m = weighted_laplacian(topology, w)
    else:
        m = _laplacian_any(topology)
    if rule.scales_by_own_weight:
        m = m / w[:, None]
    return m


def max_step_size(rule: ConsensusRule, topology: Topology, weights=None) -> float:
    """Supremum of admissible step sizes.

    AC and WAC use ``1 / max_i deg_i``; WAC-AE and IWAC use
    ``1 / max_i sum_{j in N_i} w_j``.  For the rules scaled by ``inv(Delta)``
    the bound is further capped at ``min_i w_i / (row mass of i)`` so that
    ``P`` stays nonnegative when some weights are below one; with all
    ``w_i >= 1`` the cap is inactive.
    """
    rule = ConsensusRule.parse(rule) if isinstance(rule, str) else rule
    n = topology.n
    w = np.ones(n) if weights is None or rule is ConsensusRule.AC else np.asarray(weights, dtype=float)
    if rule.uses_neighbor_weights:
        mass = topology.adjacency @ w
    else:
        mass = topology.degrees.astype(float)
    top = mass.max() if n else 0.0
    bound = np.inf if top <= 0 else 1.0 / top
    if rule.scales_by_own_weight:
        nz = mass > 0
        if np.any(nz):
            bound = min(bound, float(np.min(w[nz] / mass[nz])))
    return float(bound)


def default_alpha(rule, topology, weights=None, fraction: float = DEFAULT_ALPHA_FRACTION) -> float:
    bound = max_step_size(rule, topology, weights)
    if not np.isfinite(bound):
        return fraction
    return fraction * bound


@dataclass(frozen=True)
class PerronMatrix:
    P: np.ndarray
    rule: ConsensusRule
    alpha: float


def build_perron(rule: ConsensusRule, topology: Topology, weights, alpha: float,
                 check: bool = True) -> PerronMatrix:
    """``P = I - alpha M`` for ``rule`` on ``topology``.

    Raises:
        ValueError: if ``alpha`` is not strictly inside ``(0, max_step_size)``.
    """
    rule = ConsensusRule.parse(rule) if isinstance(rule, str) else rule
    w = np.ones(topology.n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("consensus weights must be positive")
    if check:
        bound = max_step_size(rule, topology, w)
        if not (0.0 < alpha < bound):
            raise ValueError(f"step size {alpha} outside (0, {bound}) for {rule.label}")
    m = iteration_generator(rule, topology, w)
    return PerronMatrix(np.eye(topology.n) - alpha * m, rule, float(alpha))


def edge_coefficients(rule: ConsensusRule, topology: Topology, weights, alpha: float):
    """Per-edge update coefficients for the batched kernel.

    For edge ``(i, j)``: ``x_i += cij (x_j - x_i)``, ``x_j += cji (x_i - x_j)``.
    """
    ei, ej = topology.edge_arrays()
    w = np.asarray(weights, dtype=float)
    ci = np.full(ei.size, float(alpha))
    cj = np.full(ei.size, float(alpha))
    if rule.uses_neighbor_weights:
        ci = ci * w[ej]
        cj = cj * w[ei]
    if rule.scales_by_own_weight:
        ci = ci / w[ei]
        cj = cj / w[ej]
    return ei, ej, ci, cj


def left_unit_eigenvector(P: np.ndarray) -> np.ndarray:
    """Left eigenvector of ``P`` for eigenvalue 1, normalised to sum to one."""
    vals, vecs = np.linalg.eig(P.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()


def predicted_limit(rule: ConsensusRule, weights, x0) -> float:
    """Fixed point of a connected fixed-network run from the conserved functional."""
    x0 = np.asarray(x0, dtype=float)
    w = np.ones_like(x0) if rule is ConsensusRule.AC else np.asarray(weights, dtype=float)
    v = w**2 if rule is ConsensusRule.IWAC else w
    return float(v @ x0 / v.sum())


def stated_iwac_limit(weights, x0) -> float:
    """Weighted mean ``sum w x / sum w``, the limit usually claimed for IWAC."""
    w = np.asarray(weights, dtype=float)
    return float(w @ np.asarray(x0, dtype=float) / w.sum())


# -- runs --------------------------------------------------------------------

@dataclass
class ConsensusTrace:
    rule: ConsensusRule
    states: np.ndarray
    delta_e_db: np.ndarray
    iterations_to_converge: int | None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def decision_state(self) -> np.ndarray:
        """State at the convergence iteration, or the last state if never converged."""
        k = self.iterations_to_converge
        return self.states[-1] if k is None else self.states[k]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["iteration", "su_index", "state_db"])
        with np.errstate(divide="ignore"):
            db = 10.0 * np.log10(self.states)
        for k in range(db.shape[0]):
            for i in range(db.shape[1]):
                wr.writerow([k, i, f"{db[k, i]:.10g}"])
        wr.writerow(["rule", "iters_to_converge"])
        wr.writerow([self.rule.label, "none" if self.iterations_to_converge is None
                     else self.iterations_to_converge])
        return buf.getvalue()


def run_consensus(rule: ConsensusRule, topology: Topology, x0, weights=None, alpha=None,
                  max_iters: int = 50, threshold_db: float = 1.0,
                  link_model: LinkFailureModel = FIXED, rng: np.random.Generator | None = None,
                  stop_at_convergence: bool = False) -> ConsensusTrace:
    """Iterate one consensus run and record every state.

    A dynamic ``link_model`` redraws the surviving links at each step from
    ``rng`` and rebuilds the Perron matrix; ``alpha`` is validated against the
    base topology, which bounds every sampled subgraph.
    """
    rule = ConsensusRule.parse(rule) if isinstance(rule, str) else rule
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (topology.n,):
        raise ValueError(f"x0 must have shape ({topology.n},)")
    if np.any(x <= 0):
        raise ConsensusError("initial statistics must be positive for the dB spread")
    build_laplacian(topology)
    w = np.ones(topology.n) if weights is None else np.asarray(weights, dtype=float)
    if alpha is None:
        alpha = default_alpha(rule, topology, w)
    fixed_P = build_perron(rule, topology, w, alpha).P
    dynamic = not link_model.is_fixed
    if dynamic and rng is None:
        raise ValueError("dynamic link model needs an rng")
    edges = topology.edges

    states = [x]
    spreads = [float(kernels.spread_db(x))]
    conv = 0 if spreads[0] <= threshold_db else None
    for _k in range(max_iters):
        if conv is not None and stop_at_convergence:
            break
        if dynamic:
            mask = sample_edge_mask(topology, link_model, rng)
            sub = Topology(topology.n, tuple(e for e, keep in zip(edges, mask) if keep))
            P = build_perron(rule, sub, w, alpha, check=False).P
        else:
            P = fixed_P
        x = P @ x
        if np.any(x <= 0):
            raise ConsensusError(
                f"nonpositive state at iteration {len(states)} for {rule.label}; "
                f"step size {alpha} is invalid")
        states.append(x)
        spreads.append(float(kernels.spread_db(x)))
        if conv is None and spreads[-1] <= threshold_db:
            conv = len(states) - 1
    return ConsensusTrace(rule, np.array(states), np.array(spreads), conv)


@dataclass
class BatchResult:
    states: np.ndarray
    conv_iter: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return self.conv_iter >= 0

    def iterations(self, max_iters: int) -> np.ndarray:
        """Convergence iteration per trial, censored at ``max_iters + 1``."""
        return np.where(self.conv_iter >= 0, self.conv_iter, max_iters + 1)


def run_consensus_batch(rule: ConsensusRule, topology: Topology, x0, weights, alpha: float,
                        max_iters: int = 50, threshold_db: float = 1.0,
                        link_model: LinkFailureModel = FIXED,
                        rng: np.random.Generator | None = None,
                        stop_at_convergence: bool = True) -> BatchResult:
    """Run independent trials (rows of ``x0``) through the compiled kernel.

    Per-trial link masks are drawn from ``rng`` in trial-major order, so a
    single-trial batch consumes the stream exactly like :func:`run_consensus`.
    """
    rule = ConsensusRule.parse(rule) if isinstance(rule, str) else rule
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    w = np.ones(topology.n) if weights is None else np.asarray(weights, dtype=float)
    bound = max_step_size(rule, topology, w)
    if not (0.0 < alpha < bound):
        raise ValueError(f"step size {alpha} outside (0, {bound}) for {rule.label}")
    ei, ej, ci, cj = edge_coefficients(rule, topology, w, alpha)
    masks = None
    if not link_model.is_fixed:
        if rng is None:
            raise ValueError("dynamic link model needs an rng")
        masks = sample_edge_mask(topology, link_model, rng,
                                 size=(x0.shape[0], max_iters)).astype(np.uint8)
    x, conv, bad = kernels.consensus_batch(x0, ei, ej, ci, cj, masks, int(max_iters),
                                           float(threshold_db), bool(stop_at_convergence))
    if bad >= 0:
        raise ConsensusError(f"nonpositive state in trial {bad} for {rule.label}")
    return BatchResult(np.asarray(x), np.asarray(conv))


def final_decision(trace_or_value, threshold: float) -> bool:
    """H1 (True) iff the final consensus value exceeds ``threshold``."""
    if isinstance(trace_or_value, ConsensusTrace):
        value = trace_or_value.final
    else:
        value = trace_or_value
    return np.asarray(value) > threshold
