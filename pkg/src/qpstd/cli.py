"""Command-line driver.

Subcommands:

    scatter        run the internal model, write the phasor archive,
                   angular-scan CSVs and the manifest
    ntdf-validate  spherical-wave reconstruction check of the surface
                   integrator (no time stepping)
    oracle-compare far-field cross-sections from a phasor archive against
                   the partial-wave reference
    print-stability  time-step bounds for the configured lattice

Each takes one config file (flat ``key = value`` lines, see
:mod:`qpstd.config`) plus any number of ``--set key=value`` overrides.
Exit codes: 0 success, 1 error, 2 ran fine but an acceptance threshold
was exceeded.  QPSTD_WORKERS overrides the worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_value
from . import driver

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ACCEPTANCE_FAIL = 2


def _load_config(args) -> RunConfig:
    extra = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, val = item.split("=", 1)
        extra[key.strip().lower()] = parse_value(val)
    if args.config:
        return RunConfig.from_file(args.config, extra)
    return RunConfig(extra)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", type=Path, default=None, help="config file")
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    p.add_argument(
        "-o", "--outdir", type=Path, default=None, help="output directory"
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qpstd",
        description="time-domain quantum scattering with surface-integral "
        "propagation to near, Fresnel and far fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("scatter", "ntdf-validate", "oracle-compare", "print-stability"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "oracle-compare":
            p.add_argument("archive", type=Path, help="phasor archive from scatter")
        if name == "scatter":
            p.add_argument(
                "--quiet", action="store_true", help="suppress progress output"
            )
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args)
        if args.command == "print-stability":
            report = driver.stability_report(cfg)
            print(json.dumps(report, indent=2))
            return EXIT_OK

        outdir = args.outdir or Path(cfg.get_str("output.dir"))
        if args.command == "scatter":
            progress = None
            if not args.quiet:

                def progress(done, total, _last=[0]):
                    pct = 100 * done // total
                    if pct >= _last[0] + 5 or done == total:
                        _last[0] = pct
                        print(f"  step {done}/{total} ({pct}%)", flush=True)

            out = driver.cmd_scatter(cfg, outdir, progress=progress)
            res = out["result"]
            print(f"archive: {out['archive']}")
            print(f"manifest: {out['manifest']}")
            print(
                f"steps: {res.steps_total}  sf residual: {res.sf_residual:.3e}  "
                f"tf peak: {res.tf_peak:.4f}  wall: {res.wall_seconds:.1f}s"
            )
            return EXIT_OK

        if args.command == "ntdf-validate":
            report = driver.cmd_ntdf_validate(cfg, outdir)
            print(json.dumps({k: v for k, v in report.items()}, indent=2))
            return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE_FAIL

        if args.command == "oracle-compare":
            report = driver.cmd_oracle_compare(cfg, args.archive, outdir)
            print(json.dumps(report, indent=2))
            return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE_FAIL
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
