"""Command line entry point ``phdelay``.

Exit codes: 0 all audits pass, 1 audit failure, 2 parse error, 3 validation
error, 4 numerical failure. ``PHDELAY_OUT`` overrides ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import scenario

DEFAULT_OUT = "phdelay_out"


def _out_dir(args) -> str:
    return os.environ.get("PHDELAY_OUT") or args.out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phdelay", description="Simulate and certify port-Hamiltonian delay systems.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="scenario config (JSON, schema 1)")
        p.add_argument("--out", default=DEFAULT_OUT, help="output directory (PHDELAY_OUT overrides)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_run = sub.add_parser("run", help="simulate every scenario and run its audits")
    common(p_run)
    p_run.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    p_sweep = sub.add_parser("sweep", help="cartesian parameter sweep over one base scenario")
    common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_sweep.add_argument("--plots", action="store_true", help="write per-point figures too")

    p_cert = sub.add_parser("certify", help="certificates only, no simulation")
    common(p_cert)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out = _out_dir(args)
    if args.command == "run":
        return scenario.run(args.config, out, args.seed, plots=not args.no_plots)
    if args.command == "sweep":
        code, rows = scenario.sweep(args.config, out, args.seed, jobs=max(1, args.jobs), plots=args.plots)
        for row in rows:
            logging.info("point %s: exit %s", row.get("point"), row.get("exit_code"))
        return code
    code, reports = scenario.certify_config(args.config, out, args.seed)
    if reports:
        json.dump(reports, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
