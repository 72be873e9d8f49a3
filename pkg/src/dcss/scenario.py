"""Experiment configuration and the named scenarios A-D."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np

from .graph import LinkFailureModel, Topology, default_topology_for, load_topology
from .sensing import Channel, SensingConfig, assign_snr_db


class ConfigError(ValueError):
    """Invalid experiment configuration."""


NAMED_SCENARIOS = {
    "A": dict(channel="awgn", network="fixed", pr_fail=0.0, su_count=6, snr_range_db=(-10.0, 0.0),
              weight_mode="awgn"),
    "B": dict(channel="awgn", network="dynamic", pr_fail=0.4, su_count=10, snr_range_db=(-10.0, 0.0),
              weight_mode="awgn"),
    "C": dict(channel="rayleigh", network="fixed", pr_fail=0.0, su_count=6, snr_range_db=(-2.0, 5.0),
              weight_mode="rayleigh-oracle"),
    "D": dict(channel="rayleigh", network="dynamic", pr_fail=0.4, su_count=10, snr_range_db=(-2.0, 5.0),
              weight_mode="rayleigh-oracle"),
}

WEIGHT_MODES = ("awgn", "rayleigh-est", "rayleigh-oracle")


def default_pf_grid() -> np.ndarray:
    return np.round(np.linspace(0.05, 1.0, 20), 10)


@dataclass
class ScenarioConfig:
    name: str = "custom"
    channel: str = "awgn"
    network: str = "fixed"
    pr_fail: float = 0.0
    su_count: int = 6
    snr_range_db: tuple[float, float] = (-10.0, 0.0)
    n_samples: int = 12
    trials: int = 5000
    realizations: int = 500
    seed: int = 0
    topology: str | None = None
    alpha_frac: float = 0.9
    delta_e_db: float = 1.0
    max_iters: int = 50
    roc_delta_e_db: float = 0.01
    roc_max_iters: int = 1000
    hard_pf_axis: str = "local"
    weight_mode: str = "awgn"
    window: int = 10
    snr_assignment: str | None = None
    pf_grid: tuple[float, ...] = field(default_factory=lambda: tuple(default_pf_grid()))
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        try:
            Channel(self.channel)
        except ValueError:
            raise ConfigError(f"unknown channel {self.channel!r}") from None
        if self.network not in ("fixed", "dynamic"):
            raise ConfigError(f"network must be 'fixed' or 'dynamic', got {self.network!r}")
        if not 0.0 <= self.pr_fail <= 1.0:
            raise ConfigError("pr_fail must lie in [0, 1]")
        if self.network == "fixed" and self.pr_fail != 0.0:
            raise ConfigError("a fixed network needs pr_fail = 0")
        if self.su_count < 1 or self.n_samples < 1 or self.trials < 1 or self.realizations < 1:
            raise ConfigError("su_count, n_samples, trials and realizations must be >= 1")
        lo, hi = self.snr_range_db
        if lo > hi:
            raise ConfigError("snr range must be (lo, hi) with lo <= hi")
        if not 0.0 < self.alpha_frac < 1.0:
            raise ConfigError("alpha_frac must lie strictly inside (0, 1)")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if self.roc_delta_e_db <= 0 or self.roc_max_iters < 0:
            raise ConfigError("roc_delta_e_db must be > 0 and roc_max_iters >= 0")
        if self.hard_pf_axis not in ("local", "global"):
            raise ConfigError("hard_pf_axis must be 'local' or 'global'")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.snr_assignment not in (None, "even", "random"):
            raise ConfigError("snr_assignment must be 'even' or 'random'")
        grid = np.asarray(self.pf_grid, dtype=float)
        if grid.size == 0 or np.any((grid < 0) | (grid > 1)) or np.any(np.diff(grid) <= 0):
            raise ConfigError("pf grid must be strictly increasing values in [0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @classmethod
    def named(cls, name: str, **overrides) -> "ScenarioConfig":
        key = name.upper()
        if key not in NAMED_SCENARIOS:
            raise ConfigError(f"unknown scenario {name!r}; choose from A, B, C, D or custom")
        params = dict(NAMED_SCENARIOS[key], name=key)
        params.update(overrides)
        return cls(**params)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def link_model(self) -> LinkFailureModel:
        return LinkFailureModel.from_pr_fail(self.pr_fail if self.network == "dynamic" else 0.0)

    def load_topology(self) -> Topology:
        topo = default_topology_for(self.su_count) if self.topology is None else load_topology(self.topology)
        if topo.n != self.su_count:
            raise ConfigError(f"topology has {topo.n} nodes but su_count is {self.su_count}")
        return topo

    def snr_db(self, mode: str = "even", rng=None) -> np.ndarray:
        lo, hi = self.snr_range_db
        return assign_snr_db(lo, hi, self.su_count, mode, rng)

    def sensing(self, snr_db=None) -> SensingConfig:
        snr = self.snr_db() if snr_db is None else snr_db
        return SensingConfig(snr, self.n_samples, 1.0, Channel(self.channel))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snr_range_db"] = list(self.snr_range_db)
        d["pf_grid"] = [float(x) for x in self.pf_grid]
        d.pop("threads")  # outputs do not depend on it
        if d["topology"] is not None and os.path.exists(d["topology"]):
            d["topology"] = os.path.abspath(d["topology"])
        return d
