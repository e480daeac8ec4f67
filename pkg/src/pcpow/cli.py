"""Command-line front end: config parsing, trace ingestion, batch runs,
and report (re)generation.

Config files are INI-style with sections per concern (protocol, params,
adversary, trace, metrics); unknown sections or keys are hard errors, so a
typo in a security parameter cannot slip through silently.  Every run
takes its randomness from one required --seed.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .attacks import (
    dampened_catchup_deficit,
    raising_attack_prob,
    simple_attack_limit,
    simple_attack_prob,
)
from .difficulty import validate_params
from .eventlog import EventLog
from .metrics import MetricsReport
from .params import ProtocolParams
from .sim import ConfigError, SimConfig, run
from .trace import HashrateTrace

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

_SCHEMA = {
    "protocol": {
        "name": str,
        "rounds": int,
        "round_interval_seconds": float,
        "fixed_difficulty": bool,
    },
    "params": {
        "chains": int,
        "epoch_length": int,
        "damping": Fraction,
        "mining_rate_per_second": Fraction,
        "network_delay_rounds": int,
        "hash_bits": int,
        "hashrate_ratio_bound": float,
        "hashrate_window_rounds": int,
        "honest_advantage": float,
        "concentration_slack": float,
        "security_level": float,
        "initial_target": Fraction,
        "fruit_recency_rounds": int,
        "stable_window_rounds": int,
    },
    "adversary": {
        "fraction": float,
        "strategy": str,
        "enforce_m2": bool,
    },
    "trace": {
        "file": str,
        "ramp_factor": float,
        "ramp_steps": int,
    },
    "metrics": {
        "windows": int,
        "fairness_shares": str,
    },
}

# Flat aliases accepted by --override (section inferred).
_FLAT_KEYS = {}
for _sec, _keys in _SCHEMA.items():
    for _k in _keys:
        _FLAT_KEYS.setdefault(_k, (_sec, _k))
_FLAT_KEYS["adversary_fraction"] = ("adversary", "fraction")
_FLAT_KEYS["adversary_strategy"] = ("adversary", "strategy")


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _parse_value(kind, raw: str):
    if kind is bool:
        return _parse_bool(raw)
    if kind is Fraction:
        if "/" in raw:
            num, den = raw.split("/")
            return Fraction(int(num), int(den))
        return Fraction(str(raw.strip()))
    return kind(raw)


def load_config(path, overrides: Optional[list[str]] = None) -> dict:
    """Parse and type-check a config file, returning {section: {key: value}}.
    Unknown sections or keys raise ConfigError."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    out: dict = {sec: {} for sec in _SCHEMA}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp[sec].items():
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            out[sec][key] = _parse_value(_SCHEMA[sec][key], raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if "." in key:
            sec, k = key.split(".", 1)
            if sec not in _SCHEMA or k not in _SCHEMA[sec]:
                raise ConfigError(f"unknown override key {key!r}")
        elif key in _FLAT_KEYS:
            sec, k = _FLAT_KEYS[key]
        else:
            raise ConfigError(f"unknown override key {key!r}")
        out[sec][k] = _parse_value(_SCHEMA[sec][k], raw)
    return out


def build_sim_config(conf: dict, seed: int, base_dir: Path) -> SimConfig:
    proto = conf["protocol"]
    par = conf["params"]
    adv = conf["adversary"]
    met = conf["metrics"]
    tr = conf["trace"]

    interval = proto.get("round_interval_seconds", 2.0)
    rate = par.get("mining_rate_per_second", Fraction(1, 10))
    params = ProtocolParams(
        num_chains=par.get("chains", 10),
        epoch_length=par.get("epoch_length", 2016),
        damping=par.get("damping", Fraction(4)),
        blocks_per_round=rate * Fraction(str(interval)),
        max_delay_rounds=par.get("network_delay_rounds", 1),
        hash_bits=par.get("hash_bits", 256),
        hashrate_ratio_bound=par.get("hashrate_ratio_bound", 1.1),
        hashrate_window_rounds=par.get("hashrate_window_rounds", 0),
        honest_advantage=par.get("honest_advantage", 0.5),
        concentration_slack=par.get("concentration_slack", 0.05),
        security_level=par.get("security_level", 30.0),
        initial_target=par.get("initial_target", Fraction(1)),
        fruit_recency_rounds=par.get("fruit_recency_rounds"),
        total_rounds=proto.get("rounds", 10_000),
    )
    trace = None
    if "file" in tr:
        trace = HashrateTrace.read_csv((base_dir / tr["file"]).resolve())
    elif "ramp_factor" in tr:
        duration = proto.get("rounds", 10_000)
        trace = HashrateTrace.ramp(
            tr["ramp_factor"], duration * interval,
            steps=tr.get("ramp_steps", 200),
        )
    shares = ()
    if "fairness_shares" in met:
        shares = tuple(float(x) for x in met["fairness_shares"].split(","))
    return SimConfig(
        protocol=proto.get("name", "generic-parallel"),
        params=params,
        seed=seed,
        duration=proto.get("rounds", 10_000),
        round_interval=interval,
        adversary_fraction=adv.get("fraction", 0.0),
        adversary_strategy=adv.get("strategy", "none"),
        enforce_m2=adv.get("enforce_m2", True),
        fixed_difficulty=proto.get("fixed_difficulty", False),
        trace=trace,
        fairness_shares=shares,
        stable_window=par.get("stable_window_rounds"),
        metrics_windows=met.get("windows", 10),
    )


def _write_resolved(conf: dict, seed: int, path: Path) -> None:
    cp = configparser.ConfigParser()
    for sec, keys in conf.items():
        if not keys and sec != "protocol":
            continue
        cp[sec] = {}
        for k, v in keys.items():
            cp[sec][k] = str(v)
    if "protocol" not in cp:
        cp["protocol"] = {}
    cp["protocol"]["seed"] = str(seed)
    with path.open("w", encoding="utf-8") as fh:
        cp.write(fh)


def _run_one(conf: dict, seed: int, outdir: Path, base_dir: Path) -> dict:
    cfg = build_sim_config(conf, seed, base_dir)
    report = validate_params(cfg.params)
    if not report.satisfied:
        # Analytic sufficient conditions are advisory for simulation runs.
        failed = ", ".join(
            c.name for c in report.conditions
            if not c.satisfied and not c.informational
        )
        print(f"warning: parameter conditions not met ({failed})",
              file=sys.stderr)
    outdir.mkdir(parents=True, exist_ok=True)
    result = run(cfg)
    result.log.write(outdir / "events.log")
    result.metrics.write_csvs(outdir)
    if cfg.trace is not None:
        cfg.trace.write_csv(outdir / "trace.csv")
    _write_resolved(conf, seed, outdir / "config.resolved.ini")
    return result.metrics.summary()


def cmd_run(args) -> int:
    try:
        conf = load_config(args.config, args.override)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    base = Path(args.config).resolve().parent
    try:
        if len(args.seed) == 1:
            _run_one(conf, args.seed[0], out, base)
        else:
            if len(set(args.seed)) != len(args.seed):
                print("error: seeds must be distinct", file=sys.stderr)
                return EXIT_CONFIG
            summaries = {}
            for seed in args.seed:
                summaries[seed] = _run_one(conf, seed, out / f"seed-{seed}",
                                           base)
            merged = _merge_summaries(summaries)
            out.mkdir(parents=True, exist_ok=True)
            (out / "summary.json").write_text(
                json.dumps(merged, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _merge_summaries(summaries: dict[int, dict]) -> dict:
    keys = set()
    for s in summaries.values():
        keys.update(
            k for k, v in s.items() if isinstance(v, (int, float))
        )
    mean = {
        k: sum(s[k] for s in summaries.values() if k in s)
        / sum(1 for s in summaries.values() if k in s)
        for k in sorted(keys)
    }
    return {
        "per_seed": {str(seed): s for seed, s in summaries.items()},
        "mean": mean,
    }


def cmd_validate_params(args) -> int:
    try:
        conf = load_config(args.config, args.override)
        cfg = build_sim_config(conf, seed=0,
                               base_dir=Path(args.config).resolve().parent)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = validate_params(cfg.params)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.satisfied else EXIT_CONFIG


def cmd_attack_calc(args) -> int:
    try:
        if args.attack == "simple":
            exact = simple_attack_prob(args.honest_rate, args.adversary_rate,
                                       args.depth)
            limit = simple_attack_limit(args.honest_rate, args.adversary_rate)
            print(f"exact_success_probability {exact:.10g}")
            print(f"limit_success_probability {limit:.10g}")
        elif args.attack == "raising":
            exact = raising_attack_prob(
                args.honest_rate, args.adversary_rate,
                args.epoch_length, args.raised_difficulty,
            )
            limit = simple_attack_limit(args.honest_rate, args.adversary_rate)
            print(f"exact_success_probability {exact:.10g}")
            print(f"limit_success_probability {limit:.10g}")
        else:
            deficit = dampened_catchup_deficit(
                args.honest_rate, args.adversary_rate,
                args.damping, args.epoch_length,
            )
            print(f"catchup_deficit_blocks {deficit:.10g}")
    except ValueError as exc:
        flags = ("--honest-rate/--adversary-rate/--depth/--epoch-length/"
                 "--raised-difficulty/--damping")
        print(f"error in {flags}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _report_one(logdir: Path) -> dict:
    log = EventLog.read(logdir / "events.log")
    rate = log.meta.get("blocks_per_round")
    params = ProtocolParams(
        num_chains=log.meta["num_chains"],
        epoch_length=log.meta["epoch_length"],
        blocks_per_round=Fraction(str(rate)) if rate else Fraction(1, 5),
    )
    metrics = MetricsReport.compute(log, params)
    metrics.write_csvs(logdir)
    return metrics.summary()


def cmd_report(args) -> int:
    root = Path(args.logdir)
    try:
        if (root / "events.log").exists():
            _report_one(root)
        else:
            subdirs = sorted(root.glob("seed-*"))
            if not subdirs:
                print(f"error: no events.log under {root}", file=sys.stderr)
                return EXIT_RUNTIME
            summaries = {}
            for sub in subdirs:
                seed = int(sub.name.split("-", 1)[1])
                summaries[seed] = _report_one(sub)
            (root / "summary.json").write_text(
                json.dumps(_merge_summaries(summaries), indent=2,
                           sort_keys=True) + "\n",
                encoding="utf-8",
            )
    except (ValueError, OSError) as exc:
        print(f"error: corrupt or missing log: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcpow",
        description="Variable-difficulty parallel-chain mining simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a simulation from a config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, nargs="+", required=True,
                       help="one or more distinct seeds (required)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate-params",
                           help="check the analytic parameter conditions")
    p_val.add_argument("config")
    p_val.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE")
    p_val.set_defaults(func=cmd_validate_params)

    p_atk = sub.add_parser("attack-calc",
                           help="closed-form attack probabilities")
    p_atk.add_argument("--attack", choices=("simple", "raising", "catchup"),
                       required=True)
    p_atk.add_argument("--honest-rate", type=float, required=True)
    p_atk.add_argument("--adversary-rate", type=float, required=True)
    p_atk.add_argument("--depth", type=float, default=20.0)
    p_atk.add_argument("--epoch-length", type=float, default=2016.0)
    p_atk.add_argument("--raised-difficulty", type=float, default=1e6)
    p_atk.add_argument("--damping", type=float, default=4.0)
    p_atk.set_defaults(func=cmd_attack_calc)

    p_rep = sub.add_parser("report",
                           help="recompute metrics from stored event logs")
    p_rep.add_argument("logdir")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
