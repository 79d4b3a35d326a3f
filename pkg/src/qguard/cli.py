"""Command-line entry point.

    qguard simulate --config cfg.json [--experiment NAME] [--seed N] [--out rows.csv] [--trace trace.jsonl]
    qguard gen-topology --config cfg.json [--seed N] --out topo.json

Configs are JSON objects whose keys are :class:`ExperimentConfig` fields.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiment import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    build_topology,
    preset,
    rows_to_csv,
    run_experiment,
    write_trace,
)
from .topology import write_topology


def _load(path: str, experiment: str | None, seed: int | None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if seed is not None:
        data["seeds"] = [seed]
    return preset(experiment, data) if experiment else ExperimentConfig.from_dict(data)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qguard", description="Fidelity-aware entanglement routing simulator")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment and write aggregate rows as CSV")
    sim.add_argument("--config", required=True, help="JSON experiment config")
    sim.add_argument("--experiment", choices=sorted(EXPERIMENTS), help="named sweep or range study")
    sim.add_argument("--seed", type=int, help="run this single seed instead of the config's seeds")
    sim.add_argument("--out", help="CSV output path (default: stdout)")
    sim.add_argument("--trace", metavar="PATH", help="also write per-slot records as JSON lines")

    gen = sub.add_parser("gen-topology", help="generate a seeded topology and write it as JSON")
    gen.add_argument("--config", required=True, help="JSON experiment config")
    gen.add_argument("--seed", type=int, help="seed (default: the config's first seed)")
    gen.add_argument("--out", required=True, help="topology JSON output path")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _load(args.config, args.experiment, args.seed)
            trace = [] if args.trace else None
            text = rows_to_csv(run_experiment(cfg, trace=trace))
            if args.out:
                with open(args.out, "w", newline="") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            if args.trace:
                write_trace(trace, args.trace)
        else:
            cfg = _load(args.config, None, args.seed)
            write_topology(build_topology(cfg, cfg.seeds[0]), args.out)
    except ConfigError as exc:
        print(f"qguard: config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
