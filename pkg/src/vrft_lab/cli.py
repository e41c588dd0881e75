"""Command-line harness for the full study.

Subcommands: experiment, synthesize, validate, attack, report.
Exit codes: 0 success, 2 configuration error, 3 partial failures present,
4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

from .errors import ConfigError, MissingArtifacts, VrftLabError
from .plant import ThermalPlantConfig
from .study import (
    ExperimentConfig,
    cmd_attack,
    cmd_experiment,
    cmd_report,
    cmd_synthesize,
    cmd_validate,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_IO = 4


def _parse_eps_grid(text: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ConfigError(f"bad eps pair {chunk!r}, expected eps_u:eps_y")
        pairs.append((float(parts[0]), float(parts[1])))
    if not pairs:
        raise ConfigError("empty attack grid")
    return tuple(pairs)


def _load_config_file(path: Path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    opts: dict = {}
    if parser.has_section("study"):
        st = parser["study"]
        if "scenarios" in st:
            opts["scenarios"] = tuple(
                s.strip() for s in st["scenarios"].split(",") if s.strip())
        if "n_points" in st:
            opts["n_points"] = tuple(
                int(v) for v in st["n_points"].split(",") if v.strip())
        for key, conv in (("n_seeds", int), ("master_seed", int),
                          ("weeks", int), ("attack_seeds", int),
                          ("omega0", float), ("ts", float),
                          ("setpoint", float), ("init_temp", float),
                          ("jobs", int)):
            if key in st:
                opts[key] = conv(st[key])
        if "shared_weather" in st:
            opts["shared_weather"] = st.getboolean("shared_weather")
        if "output_dir" in st:
            opts["output_dir"] = Path(st["output_dir"])
    if parser.has_section("attack"):
        at = parser["attack"]
        if "eps_grid" in at:
            opts["attack_grid"] = _parse_eps_grid(at["eps_grid"])
        if "budget_y_reference" in at:
            opts["budget_y_reference"] = at["budget_y_reference"]
    if parser.has_section("plant"):
        fields = {k: float(v) for k, v in parser["plant"].items()}
        try:
            opts["plant"] = ThermalPlantConfig(**fields)
        except TypeError as exc:
            raise ConfigError(f"bad plant option: {exc}") from None
    return opts


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    opts: dict = {}
    if args.config:
        opts.update(_load_config_file(Path(args.config)))
    if args.seed is not None:
        opts["master_seed"] = args.seed
    if args.scenario is not None:
        opts["scenarios"] = (args.scenario,)
    if args.n is not None:
        opts["n_points"] = (args.n,)
    if args.jobs is not None:
        opts["jobs"] = args.jobs
    if args.seeds is not None:
        opts["n_seeds"] = args.seeds
    if args.eps_u is not None or args.eps_y is not None:
        if args.eps_u is None or args.eps_y is None:
            raise ConfigError("--eps-u and --eps-y must be given together")
        opts["attack_grid"] = ((args.eps_u, args.eps_y),)
    env_dir = os.environ.get("VRFT_LAB_OUTPUT_DIR")
    if args.output_dir is not None:
        opts["output_dir"] = Path(args.output_dir)
    elif env_dir:
        opts["output_dir"] = Path(env_dir)
    if "output_dir" not in opts:
        raise ConfigError(
            "no output directory: pass --output-dir, set it in the config "
            "file, or export VRFT_LAB_OUTPUT_DIR")
    try:
        return ExperimentConfig(**opts)
    except (TypeError, VrftLabError) as exc:
        raise ConfigError(str(exc)) from None


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrft-lab",
        description="Data-driven controller synthesis and poisoning study")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, hlp in (
        ("experiment", "generate seeded open-loop training datasets"),
        ("synthesize", "fit controllers from recorded datasets"),
        ("validate", "score controllers in closed loop"),
        ("attack", "poison datasets and score the degraded controllers"),
        ("report", "consolidate results into report + figures"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--jobs", type=int, help="parallel runs per batch")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--scenario", choices=["A", "B"],
                       help="restrict to one excitation scenario")
        p.add_argument("--n", type=int, help="restrict to one dataset size")
        p.add_argument("--seeds", type=int, help="number of runs per group")
        p.add_argument("--eps-u", type=float, help="input perturbation budget")
        p.add_argument("--eps-y", type=float, help="output perturbation budget")
        p.add_argument("--output-dir", help="study output directory")
    return parser


COMMANDS = {
    "experiment": cmd_experiment,
    "synthesize": cmd_synthesize,
    "validate": cmd_validate,
    "attack": cmd_attack,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = _build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outcome = COMMANDS[args.command](cfg)
    except MissingArtifacts as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VrftLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for key, value in sorted(outcome.items()):
        print(f"{key}: {value}")
    if outcome.get("failures"):
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
