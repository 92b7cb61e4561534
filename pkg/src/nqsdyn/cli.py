"""Command-line interface.

    nqsdyn run <config.yaml> [--output DIR] [--threads N] [--seed-override K]
    nqsdyn prep <config.yaml> [--output DIR] [--threads N] [--seed-override K]
    nqsdyn validate <config.yaml>

Exit codes: 0 ok, 1 configuration error, 2 numeric error, 3 divergence
(an expected result in instability studies). NQSDYN_OUTPUT_ROOT prefixes
relative output directories.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import parse_config
from .errors import ConfigError, NumericFailure
from .experiment import resolve_output_dir, run_experiment, prepare_initial_state, _EventLog


def _load(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _apply_overrides(cfg, args):
    if getattr(args, "seed_override", None) is not None:
        cfg = cfg.with_overrides(seed_override=args.seed_override)
    if getattr(args, "output", None) is not None:
        cfg = cfg.with_overrides(output_dir=args.output)
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(_load(args.config), args)
    return run_experiment(cfg, threads=args.threads)


def cmd_prep(args) -> int:
    cfg = _apply_overrides(_load(args.config), args)
    outdir = resolve_output_dir(cfg)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {outdir} is not writable: {exc}") from exc
    log = _EventLog(outdir / "events.jsonl", enabled="jsonl" in cfg.effective["output"]["formats"])
    (outdir / "effective_config.yaml").write_text(cfg.to_yaml(), encoding="ascii")
    try:
        prepare_initial_state(cfg, outdir, log)
    except NumericFailure as exc:
        print(f"prep failed: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    sys.stdout.write(cfg.to_yaml())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nqsdyn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="experiment config (YAML)")
        p.add_argument("--output", help="override output.directory")
        p.add_argument("--threads", type=int, help="pin linear-algebra thread count")
        p.add_argument("--seed-override", type=int, dest="seed_override",
                       help="replace rbm/prep/sampler seeds")

    p_run = sub.add_parser("run", help="run prep + dynamics (+ sweep)")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_prep = sub.add_parser("prep", help="run state preparation only")
    common(p_prep)
    p_prep.set_defaults(func=cmd_prep)

    p_val = sub.add_parser("validate", help="validate a config and echo the effective form")
    p_val.add_argument("config", help="experiment config (YAML)")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    except NumericFailure as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
