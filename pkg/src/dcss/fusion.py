"""Centralized fusion baselines: k-out-of-N hard voting and soft linear combining."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv

from .sensing import H0, H1, SensingConfig


def qfunc(x):
    """Gaussian tail probability ``Q(x) = P(Z > x)``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def qfunc_inv(p):
    return math.sqrt(2.0) * erfcinv(2.0 * np.asarray(p, dtype=float))


@dataclass(frozen=True)
class HardRule:
    """Declare H1 when at least ``k`` of ``n`` local decisions are H1."""

    k: int
    n: int
    name: str = "k-out-of-n"

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"vote threshold k={self.k} outside [1, {self.n}]")

    @classmethod
    def OR(cls, n: int) -> "HardRule":
        return cls(1, n, "OR")

    @classmethod
    def AND(cls, n: int) -> "HardRule":
        return cls(n, n, "AND")

    @classmethod
    def MAJORITY(cls, n: int) -> "HardRule":
        return cls(math.ceil(n / 2), n, "MAJORITY")

    @classmethod
    def named(cls, name: str, n: int) -> "HardRule":
        try:
            return {"OR": cls.OR, "AND": cls.AND, "MAJORITY": cls.MAJORITY}[name.upper()](n)
        except KeyError:
            raise ValueError(f"unknown hard rule {name!r}") from None


def hard_decide(local_decisions, rule: HardRule):
    """Vote count against ``rule.k``; works on ``(..., n)`` arrays."""
    d = np.asarray(local_decisions, dtype=bool)
    if d.shape[-1] != rule.n:
        raise ValueError(f"expected {rule.n} local decisions, got {d.shape[-1]}")
    return d.sum(axis=-1) >= rule.k


def vote_count_pmf(p) -> np.ndarray:
    """Poisson-binomial pmf of the number of firing detectors."""
    pmf = np.zeros(len(p) + 1)
    pmf[0] = 1.0
    for m, pi in enumerate(p, start=1):
        pmf[1:m + 1] = pmf[1:m + 1] * (1.0 - pi) + pmf[:m] * pi
        pmf[0] *= 1.0 - pi
    return pmf


def hard_pd_analytic(per_su_pd, rule: HardRule) -> float:
    """Probability that at least ``k`` of the independent detectors fire."""
    p = np.asarray(per_su_pd, dtype=float)
    if p.size != rule.n:
        raise ValueError(f"expected {rule.n} probabilities, got {p.size}")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return float(min(1.0, vote_count_pmf(p)[rule.k:].sum()))


def binomial_tail(p: float, n: int, k: int) -> float:
    return sum(math.comb(n, q) * p**q * (1.0 - p) ** (n - q) for q in range(k, n + 1))


def local_pf_for_global(pf: float, rule: HardRule) -> float:
    """Common local false-alarm rate giving global false-alarm ``pf`` under ``rule``.

    H0 statistics are i.i.d. across SUs, so the global rate is a binomial tail
    that increases monotonically in the local rate; solved by bisection.
    """
    if pf <= 0.0:
        return 0.0
    if pf >= 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binomial_tail(mid, rule.n, rule.k) < pf:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def egc_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def mrc_weights(config: SensingConfig) -> np.ndarray:
    w = config.eta / config.sigma2
    return w / w.sum()


def soft_statistic(t, rho) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if t.shape[-1] != rho.size:
        raise ValueError("statistic and weight dimensions differ")
    if np.any(rho < 0) or not np.any(rho > 0):
        raise ValueError("soft weights must be nonnegative and not all zero")
    return t @ rho


def soft_moments(rho, config: SensingConfig):
    """Mean and variance of ``sum rho_i T_i`` under H0 and H1, Gaussian approximation."""
    rho = np.asarray(rho, dtype=float)
    m0, v0 = config.moments(H0)
    m1, v1 = config.moments(H1)
    return (rho @ m0, rho**2 @ v0), (rho @ m1, rho**2 @ v1)


def gaussian_pd(pf, mean0, var0, mean1, var1):
    """Detection probability of a Gaussian threshold test at false-alarm ``pf``.

    Boundary false-alarm values are returned as limits.
    """
    pf = np.asarray(pf, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        arg = (qfunc_inv(pf) * np.sqrt(var0) - mean1 + mean0) / np.sqrt(var1)
        pd = qfunc(arg)
    pd = np.where(pf <= 0.0, 0.0, np.where(pf >= 1.0, 1.0, pd))
    return pd if pd.ndim else float(pd)


def soft_pd_analytic(rho, config: SensingConfig, pf):
    (m0, v0), (m1, v1) = soft_moments(rho, config)
    return gaussian_pd(pf, m0, v0, m1, v1)
