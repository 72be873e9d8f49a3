"""Command-line entry point: ``dcss {roc,converge,slem}``.

Settings resolve as command-line flags over a ``--config`` file over the
named scenario.  Exit status is 0 on success, 2 for configuration errors and
3 for runtime or numerical failures.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .analysis.complexity import complexity_csv, complexity_report
from .analysis.convergence import convergence_table, example_traces
from .analysis.roc import SchemeSetup, estimate_rocs, parse_schemes
from .analysis.spectral import slem_report
from .consensus import ALL_RULES, ConsensusError, ConsensusRule
from .graph import TopologyError
from .scenario import WEIGHT_MODES, ConfigError, ScenarioConfig

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

# flag name -> (ScenarioConfig field, parser)
_FIELDS = {
    "sus": ("su_count", int),
    "topology": ("topology", str),
    "trials": ("trials", int),
    "realizations": ("realizations", int),
    "seed": ("seed", int),
    "alpha_frac": ("alpha_frac", float),
    "delta_e_db": ("delta_e_db", float),
    "max_iters": ("max_iters", int),
    "roc_delta_e_db": ("roc_delta_e_db", float),
    "roc_max_iters": ("roc_max_iters", int),
    "hard_pf_axis": ("hard_pf_axis", str),
    "weight_mode": ("weight_mode", str),
    "window": ("window", int),
    "snr_assignment": ("snr_assignment", str),
    "channel": ("channel", str),
    "network": ("network", str),
    "pr_fail": ("pr_fail", float),
    "snr_range_db": ("snr_range_db", None),
    "pf_grid": ("pf_grid", None),
    "threads": ("threads", int),
}
_EXTRA_KEYS = {"scenario", "schemes", "rules", "out", "timing"}


def parse_pf_grid(text: str) -> tuple[float, ...]:
    """``"0.1,0.2,0.5"`` or ``"lo:hi:n"`` (inclusive linspace)."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            return tuple(float(x) for x in np.round(np.linspace(float(lo), float(hi), int(n)), 10))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"cannot parse pf grid {text!r}") from None


def parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.replace(":", ",").split(","))
    except ValueError:
        raise ConfigError(f"snr range must be 'lo,hi', got {text!r}") from None
    return lo, hi


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment, keys match the flags."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in _FIELDS and key not in _EXTRA_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _convert(key: str, value):
    if key == "pf_grid":
        return parse_pf_grid(value) if isinstance(value, str) else tuple(value)
    if key == "snr_range_db":
        return parse_range(value) if isinstance(value, str) else tuple(value)
    conv = _FIELDS[key][1]
    if isinstance(value, str) and conv is not str:
        try:
            return conv(value)
        except ValueError:
            raise ConfigError(f"invalid value {value!r} for {key}") from None
    return value


def resolve(args: argparse.Namespace) -> tuple[ScenarioConfig, dict]:
    """Scenario plus the non-scenario settings after applying precedence."""
    file_vals = read_config_file(args.config) if args.config else {}
    cli_vals = {k: v for k, v in vars(args).items()
                if v is not None and (k in _FIELDS or k in _EXTRA_KEYS)}
    merged = {**file_vals, **cli_vals}
    name = str(merged.get("scenario", "A"))
    overrides = {_FIELDS[k][0]: _convert(k, v) for k, v in merged.items() if k in _FIELDS}
    overrides.setdefault("threads", os.cpu_count() or 1)
    try:
        if name.lower() == "custom":
            sc = ScenarioConfig(name="custom", **overrides)
        else:
            sc = ScenarioConfig.named(name, **overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    extra = {k: merged[k] for k in ("schemes", "rules", "timing") if k in merged}
    extra["out"] = merged.get("out", "out")
    return sc, extra


def _rules(spec) -> list[ConsensusRule]:
    if spec is None:
        return list(ALL_RULES)
    names = [s.strip() for s in str(spec).split(",") if s.strip()]
    if any(n.lower() == "all" for n in names):
        return list(ALL_RULES)
    try:
        return [ConsensusRule.parse(n) for n in names]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _truthy(v) -> bool:
    return v is True or str(v).lower() in ("1", "true", "yes", "on")


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(command: str, sc: ScenarioConfig, extra: dict) -> dict:
    return {"tool": "dcss", "version": __version__, "command": command, "seed": sc.seed,
            "kernel_backend": kernels.BACKEND, "config": sc.to_dict(), **extra}


def cmd_roc(sc: ScenarioConfig, extra: dict, out: Path) -> None:
    try:
        schemes = parse_schemes(extra.get("schemes", "all"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    curves = estimate_rocs(sc, schemes)
    out.mkdir(parents=True, exist_ok=True)
    for s, c in curves.items():
        (out / f"roc_{s}.csv").write_text(c.to_csv())
    _dump(out / "manifest.json", _manifest("roc", sc, {"schemes": schemes}))
    _dump(out / "summary.json", {s: {"pf": [round(float(x), 10) for x in c.pf],
                                     "pd": [round(float(x), 10) for x in c.pd],
                                     "stderr": [round(float(x), 10) for x in c.stderr],
                                     "trials": c.trials} for s, c in curves.items()})


def cmd_converge(sc: ScenarioConfig, extra: dict, out: Path) -> None:
    rules = _rules(extra.get("rules"))
    report = convergence_table([sc], rules)
    traces = example_traces(sc, rules)
    out.mkdir(parents=True, exist_ok=True)
    (out / "convergence.csv").write_text(report.to_csv())
    for rule, tr in traces.items():
        (out / f"trace_{rule}.csv").write_text(tr.to_csv())
    _dump(out / "manifest.json", _manifest("converge", sc, {"rules": [r.label for r in rules]}))
    _dump(out / "summary.json", report.to_dict())


def cmd_slem(sc: ScenarioConfig, extra: dict, out: Path) -> None:
    rules = _rules(extra.get("rules"))
    setup = SchemeSetup.build(sc, rules=[r.value for r in rules])
    rows = []
    for rule in rules:
        rep = slem_report([rule], setup.topology, setup.weights[rule.value], sc.link_model,
                          alpha=setup.alphas[rule.value])
        rows.extend(rep.rows)
    report = type(rep)(rows, setup.topology.name, sc.link_model.pr_connection)
    timing = _truthy(extra.get("timing", False))
    cx = complexity_report(rules, measure=timing)
    out.mkdir(parents=True, exist_ok=True)
    (out / "slem.csv").write_text(report.to_csv())
    (out / "complexity.csv").write_text(complexity_csv(cx))
    _dump(out / "manifest.json", _manifest("slem", sc, {"rules": [r.label for r in rules]}))
    _dump(out / "summary.json", {
        "topology": report.topology, "pr_connection": report.pr_connection,
        "slem": [{"rule": r.rule, "alpha": r.alpha, "rho2": r.rho2, "rho2_gram": r.rho2_gram,
                  "t_small": r.t_small, "t_large": r.t_large} for r in report.rows],
        "complexity": [{"rule": c["rule"], "class": c["class"]} for c in cx]})
    if timing:  # wall-clock data kept apart from the reproducible outputs
        _dump(out / "timing.json", {c["rule"]: {str(n): t for n, t in c["timings"].items()}
                                    for c in cx})


COMMANDS = {"roc": cmd_roc, "converge": cmd_converge, "slem": cmd_slem}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("scenario")
    g.add_argument("--scenario", help="A, B, C, D or custom (default A)")
    g.add_argument("--config", help="flat key = value file with the same keys as the flags")
    g.add_argument("--sus", type=int, help="number of secondary users")
    g.add_argument("--topology", help="topology file or builtin name (topo6, topo10, topo20)")
    g.add_argument("--trials", type=int, help="Monte-Carlo trials per hypothesis")
    g.add_argument("--realizations", type=int, help="channel realizations for converge")
    g.add_argument("--seed", type=int)
    g.add_argument("--pf-grid", help="comma list or lo:hi:n")
    g.add_argument("--alpha-frac", type=float, help="step size as a fraction of its bound")
    g.add_argument("--delta-e-db", type=float, help="convergence spread threshold in dB")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--roc-delta-e-db", type=float, help="spread at which ROC decisions are taken")
    g.add_argument("--roc-max-iters", type=int)
    g.add_argument("--hard-pf-axis", choices=("local", "global"))
    g.add_argument("--weight-mode", choices=WEIGHT_MODES)
    g.add_argument("--window", type=int, help="measurements used by rayleigh-est weights")
    g.add_argument("--snr-assignment", choices=("even", "random"))
    g.add_argument("--channel", choices=("awgn", "rayleigh"))
    g.add_argument("--network", choices=("fixed", "dynamic"))
    g.add_argument("--pr-fail", type=float)
    g.add_argument("--snr-range-db", help="lo,hi")
    g.add_argument("--out", help="output directory (default ./out)")
    g.add_argument("--threads", type=int, help="worker threads (default: all cores)")

    p = argparse.ArgumentParser(prog="dcss", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dcss {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    roc = sub.add_parser("roc", parents=[common], help="global ROC curves")
    roc.add_argument("--schemes", help="comma list or 'all'")
    conv = sub.add_parser("converge", parents=[common], help="iterations to convergence")
    conv.add_argument("--rules", help="comma list of AC, WAC, WAC-AE, IWAC or 'all'")
    slem = sub.add_parser("slem", parents=[common], help="SLEM and complexity tables")
    slem.add_argument("--rules", help="comma list or 'all'")
    slem.add_argument("--timing", action="store_true", default=None,
                      help="also write measured per-iteration times to timing.json")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc, extra = resolve(args)
        COMMANDS[args.command](sc, extra, Path(extra["out"]))
    except (ConfigError, TopologyError) as exc:
        print(f"dcss: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConsensusError, FloatingPointError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"dcss: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
