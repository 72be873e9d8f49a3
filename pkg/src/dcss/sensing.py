"""Received-signal generation and energy statistics for each SU.

Signals are real baseband BPSK with unit-variance Gaussian noise by default.
Under a Rayleigh channel the amplitude gain is block-fading: drawn once per
trial and held over the detection interval.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Channel(str, enum.Enum):
    AWGN = "awgn"
    RAYLEIGH = "rayleigh"


H0 = 0
H1 = 1


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def assign_snr_db(lo: float, hi: float, n: int, mode: str = "even",
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-SU SNRs over ``[lo, hi]`` dB: evenly spaced, or seeded-uniform."""
    if mode == "even":
        return np.linspace(lo, hi, n) if n > 1 else np.array([0.5 * (lo + hi)])
    if mode == "random":
        if rng is None:
            raise ValueError("random SNR assignment needs an rng")
        return rng.uniform(lo, hi, size=n)
    raise ValueError(f"unknown SNR assignment mode {mode!r}")


@dataclass(frozen=True)
class SensingConfig:
    """Detection-interval parameters shared by all SUs.

    ``snr_db`` is the per-sample SNR of each SU (average SNR for Rayleigh).
    """

    snr_db: np.ndarray
    n_samples: int = 12
    noise_variance: np.ndarray | float = 1.0
    channel: Channel = Channel.AWGN
    sigma2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        snr = np.atleast_1d(np.asarray(self.snr_db, dtype=float))
        object.__setattr__(self, "snr_db", snr)
        object.__setattr__(self, "channel", Channel(self.channel))
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        sigma2 = np.broadcast_to(np.asarray(self.noise_variance, dtype=float), snr.shape).copy()
        if np.any(sigma2 <= 0):
            raise ValueError("noise variances must be positive")
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def n_su(self) -> int:
        return self.snr_db.size

    @property
    def snr_per_sample(self) -> np.ndarray:
        return db_to_linear(self.snr_db)

    @property
    def eta(self) -> np.ndarray:
        """Window SNR of every SU (average window SNR under Rayleigh)."""
        return self.n_samples * self.snr_per_sample

    def moments(self, hypothesis: int) -> tuple[np.ndarray, np.ndarray]:
        """Gaussian-approximation mean and variance of each ``T_i``."""
        s2 = self.sigma2
        ns = self.n_samples
        if hypothesis == H0:
            return ns * s2, 2.0 * ns * s2**2
        eta = self.eta
        return (ns + eta) * s2, 2.0 * (ns + 2.0 * eta) * s2**2


def snr_linear(config: SensingConfig, su_index: int, per_sample: bool = False) -> float:
    """SNR of one SU summed over the detection window (``per_sample`` for a single sample)."""
    if per_sample:
        return float(config.snr_per_sample[su_index])
    return float(config.eta[su_index])


def signal_amplitude(config: SensingConfig) -> np.ndarray:
    """BPSK amplitude giving the configured per-sample SNR against ``sigma2``."""
    return np.sqrt(config.snr_per_sample * config.sigma2)


def sample_statistics(config: SensingConfig, hypothesis: int, rng: np.random.Generator,
                      trials: int | None = None) -> np.ndarray:
    """Energy statistics ``T_i = sum_t y_i(t)^2``.

    Returns shape ``(n_su,)`` when ``trials`` is None, else ``(trials, n_su)``.
    """
    single = trials is None
    nt = 1 if single else int(trials)
    n, ns = config.n_su, config.n_samples
    noise = rng.standard_normal((nt, n, ns)) * np.sqrt(config.sigma2)[None, :, None]
    if hypothesis == H0:
        y = noise
    else:
        symbols = 2.0 * rng.integers(0, 2, size=(nt, n, ns)) - 1.0
        amp = np.broadcast_to(signal_amplitude(config), (nt, n))
        if config.channel is Channel.RAYLEIGH:
            # |h|^2 ~ Exp(1): unit mean power
            amp = amp * np.sqrt(rng.exponential(1.0, size=(nt, n)))
        y = amp[:, :, None] * symbols + noise
    t = np.einsum("tns,tns->tn", y, y)
    return t[0] if single else t


def local_decision(t, threshold):
    """H1 iff ``t > threshold``; ties resolve to H0."""
    return np.asarray(t) > threshold
