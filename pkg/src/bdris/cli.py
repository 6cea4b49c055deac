"""Command-line entry point: ``bdris run | preset | validate``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import harness
from .scattering import ConfigError

log = logging.getLogger("bdris")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
PRESETS = ("fig3-reflective", "fig3-fullspace", "power-gain", "complexity-table")


def _report(result: harness.ExperimentResult):
    for p in result.points:
        status = f"ERROR {p.error}" if p.error else f"mean={p.mean:.6g} std={p.std:.4g} ci95={p.ci95:.4g}"
        print(f"[{p.sweep_id:3d}] {p.config.label():40s} trials={p.trials:4d} {status}")


def _execute(spec: harness.ExperimentSpec, out, threads: int) -> int:
    result = harness.run(spec, threads=threads)
    paths = harness.write_result(result, out)
    _report(result)
    if spec.metric == "power_gain" and not result.failed:
        print(f"fully/single mean received-power ratio: {harness.power_ratio(result):.4f}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_SOLVER if result.failed else EXIT_OK


def cmd_run(args) -> int:
    spec = harness.load_spec(args.config)
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["master_seed"] = args.seed
    spec = dataclasses.replace(spec, **changes).validate()
    out = args.out or spec.output
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'output' in the config")
    return _execute(spec, out, args.threads)


def cmd_preset(args) -> int:
    if args.name == "complexity-table":
        path = harness.write_complexity_table(args.out)
        for row in harness.complexity_table():
            print(f"{row['mode']:13s} {row['architecture']:7s} group={row['group_size']:3d} -> {row['components']}")
        print(f"wrote {path}")
        return EXIT_OK
    if args.name == "power-gain":
        spec = harness.preset_power_gain()
    else:
        spec = harness.preset_fig3(args.name.split("-", 1)[1])
    if args.trials is not None:
        spec = dataclasses.replace(spec, trials=args.trials).validate()
    return _execute(spec, args.out, args.threads)


def cmd_validate(args) -> int:
    spec = harness.load_spec(args.config)
    for i, cfg in enumerate(spec.points()):
        print(f"[{i:3d}] {cfg.label()}")
    print(f"ok: {len(spec.points())} sweep point(s), {spec.trials} trial(s) each")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdris", description="BD-RIS sum-rate experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment described by a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("preset", help="run a built-in experiment")
    s.add_argument("name", choices=PRESETS)
    s.add_argument("--out", required=True)
    s.add_argument("--trials", type=int)
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_preset)

    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
