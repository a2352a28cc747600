"""Command line entry point: ``tdho <command> --config FILE [--out DIR] [--workers N] [--force]``.

Exit codes: 0 success or PASS, 1 scientific FAIL, 2 usage or config error,
3 numerical failure.  The default output directory is
``$TDHO_OUTPUT_ROOT/<config name>/<command>`` for single runs and
``$TDHO_OUTPUT_ROOT/<config name>`` for sweeps (``runs/`` when the variable is unset).
"""
from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import ConfigError
from .harness import EXIT_CONFIG, execute, output_root, run_sweep

COMMANDS = {
    "classical": "classical",
    "params": "params",
    "evolve": "evolve",
    "verify": "verify_theorem",
    "picard": "picard",
    "sweep": None,
}


def _parser():
    p = argparse.ArgumentParser(prog="tdho", description="Final-state problem for time-decaying oscillators.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="sectioned key=value config file")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--workers", type=int, default=1, help="parallel runs (sweep only)")
        s.add_argument("--force", action="store_true", help="re-run completed runs")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.workers < 1:
        print("tdho: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"tdho: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"tdho: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    wanted = COMMANDS[args.command]
    if wanted is not None:
        if cfg.experiment is None:
            cfg = cfg.with_value("run.experiment", wanted)
        elif cfg.experiment != wanted:
            print(f"tdho: config experiment {cfg.experiment!r} does not match command {args.command!r}",
                  file=sys.stderr)
            return EXIT_CONFIG
    elif cfg.experiment is None:
        print("tdho: sweep configs must set run.experiment", file=sys.stderr)
        return EXIT_CONFIG

    stem = os.path.splitext(os.path.basename(args.config))[0]
    default = os.path.join(output_root(), stem) if wanted is None else os.path.join(output_root(), stem, args.command)
    out = args.out or cfg.run.output_dir or default

    if wanted is None:
        try:
            code = run_sweep(cfg, out, workers=args.workers, force=args.force)
        except ConfigError as exc:
            print(f"tdho: config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"sweep: exit={code} aggregate={os.path.join(out, 'aggregate.csv')}")
        return code

    res = execute(cfg, out, force=args.force)
    tag = " (cached)" if res.skipped else ""
    line = f"{cfg.experiment}: {res.verdict}{tag} exit={res.exit_code} out={out}"
    if res.reason:
        line += f" reason={res.reason}"
    print(line)
    return res.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
