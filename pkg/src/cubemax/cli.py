"""Command line entry point: ``cubemax <command> [flags]``.

Exit codes: 0 success, 1 parameter error, 2 check failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import ConfigError, ParameterError
from .experiments import run
from .reports import COMMANDS, ExperimentConfig, body, dumps, parse_config_text, rows_to_csv, validate_report

CONFIG_ENV = "CUBEMAX_CONFIG"

EXIT_OK, EXIT_PARAM, EXIT_CHECK, EXIT_IO = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubemax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS
    for name in COMMANDS:
        p = sub.add_parser(name, argument_default=S)
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--n", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--eps", type=float)
        p.add_argument("--K", type=float)
        p.add_argument("--eta", type=float)
        p.add_argument("--levels", help="comma separated levels L > 1")
        p.add_argument("--grid", type=int, help="bridge grid resolution")
        p.add_argument("--workers", type=int)
        p.add_argument("--cap-mode", choices=["threshold", "explicit"])
        p.add_argument("--cap-value", type=float)
        p.add_argument("--out")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--c-eta", type=float)
        p.add_argument("--self-test", action="store_const", const=True)
        p.add_argument("--inject-d", type=float)
        p.add_argument("--n-grid")
        p.add_argument("--eta-grid")
        p.add_argument("--A-grid", dest="a_grid")
        p.add_argument("--ks-trials", type=int)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = {}
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if path:
        raw.update(parse_config_text(Path(path).read_text()))
    flags = {k: v for k, v in vars(args).items() if k != "config"}
    raw.update(flags)
    raw["command"] = args.command
    return ExperimentConfig.from_mapping(raw)


def write_outputs(cfg: ExperimentConfig, doc: dict, rows: list) -> None:
    out = Path(cfg.out)
    if cfg.format == "csv":
        out.write_text(rows_to_csv(rows))
        out.with_suffix(out.suffix + ".json").write_text(dumps(doc))
    else:
        out.write_text(dumps(doc))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        doc, rows = run(cfg)
    except (ParameterError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    validate_report(doc)
    if cfg.out:
        try:
            write_outputs(cfg, doc, rows)
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return EXIT_IO
    if doc["status"] == "warn":
        print("warning: some checks were not applicable", file=sys.stderr)
    print(doc["summary"])
    return EXIT_CHECK if doc["status"] == "fail" else EXIT_OK


__all__ = ["main", "build_parser", "body"]
