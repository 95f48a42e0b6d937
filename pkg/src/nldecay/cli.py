"""Command-line entry point.

    nldecay simulate --config run.yaml [--out-dir DIR] [--t-end T] [--tol TOL] [--seed N]
    nldecay pde --config heat.yaml
    nldecay peano --config peano.yaml
    nldecay check --config scenario.yaml
    nldecay catalog thm-2-11-pass [--out-dir DIR]
    nldecay list-catalog
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import runner
from .catalog import list_catalog
from .config import load_config, parse_mapping
from .errors import CatalogLookupError, ConfigError

# subcommand -> scenario kinds it accepts
_KINDS = {"simulate": ("surrogate",), "pde": ("pde",), "peano": ("peano",)}


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="scenario YAML file")
    p.add_argument("--out-dir", help="output directory (default: out/<scenario name>)")
    p.add_argument("--t-end", type=float, help="override the solver horizon")
    p.add_argument("--tol", type=float, help="override the checker tolerance")
    p.add_argument("--seed", type=int, help="override the probe seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="nldecay", description="Decay checks for nonlinear differential inequalities.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "surrogate ODE scenario"), ("pde", "1D heat-equation scenario"),
                       ("peano", "Peano iterate scenario"), ("check", "hypothesis checks only")):
        _add_common(sub.add_parser(name, help=text))
    ids = ", ".join(cid for cid, _ in list_catalog())
    cat = sub.add_parser("catalog", help=f"run a built-in case ({ids})")
    cat.add_argument("case", nargs="?", help="catalog id")
    _add_common(cat, config_required=False)
    sub.add_parser("list-catalog", help="print the built-in case ids")
    return parser


def _overrides(args):
    return {"t_end": args.t_end, "tol": args.tol, "seed": args.seed, "out_dir": args.out_dir}


def _load(args):
    if args.command == "catalog":
        if args.config:
            return load_config(args.config, _overrides(args))
        if not args.case:
            raise ConfigError("catalog needs a case id or --config", field="case")
        return parse_mapping({"kind": "catalog", "catalog": args.case}, overrides=_overrides(args))
    sc = load_config(args.config, _overrides(args))
    allowed = _KINDS.get(args.command)
    if allowed and sc.kind not in allowed:
        raise ConfigError(f"'{args.command}' runs kind {allowed[0]}, config has kind {sc.kind}", field="kind")
    if args.command == "check":
        # no solve, so only theorem expectations can be judged
        expect = {k: v for k, v in sc.expect.items() if k.startswith(("thm-", "cor-"))}
        sc = dataclasses.replace(sc, kind="check-only", expect=expect)
    return sc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else runner.EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "list-catalog":
        for cid, text in list_catalog():
            print(f"{cid}\t{text}")
        return runner.EXIT_OK
    try:
        sc = _load(args)
        code, report = runner.run_scenario(sc, args.out_dir)
    except (ConfigError, CatalogLookupError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    for tr in report["theorem"]:
        print(f"{tr['theorem']:<12} {tr['status']}")
    if report["verdict"]:
        print(f"{'verdict':<12} {report['verdict']['status']}")
    for row in report["expectations"]:
        if not row["met"]:
            print(f"expectation {row['key']}: wanted {row['expected']}, got {row['actual']}", file=sys.stderr)
    if report["error"]:
        print(f"aborted: {report['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
