"""Command-line entry point: ``rhdg --experiment conv --k 1 --out conv_k1.csv``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import (
    EXPERIMENTS,
    RunConfig,
    run_convergence,
    run_cr_equiv,
    run_infsup,
    run_tau_sweep,
    write_outputs,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rhdg", description="Reduced-stabilization HDG Stokes experiments")
    p.add_argument("--experiment", choices=EXPERIMENTS, default="conv")
    p.add_argument("--k", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--tau", type=float, default=None, help="stabilization parameter (default 10(k+1)^2)")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--base-n", type=int, default=4)
    p.add_argument("--quad-boost", type=int, default=4)
    p.add_argument("--mesh", type=Path, default=None, help="plain-text mesh to start from instead of the unit-square grid")
    p.add_argument("--out", type=Path, default=None, help="CSV output path (default: print only)")
    p.add_argument("--solver", choices=("full", "condensed"), default="full")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = RunConfig(
            experiment=args.experiment,
            k=args.k,
            tau=args.tau,
            levels=args.levels,
            base_n=args.base_n,
            quad_boost=args.quad_boost,
            out=args.out,
            mesh=args.mesh,
            solver=args.solver,
        )
    except ValueError as exc:
        print(f"rhdg: {exc}", file=sys.stderr)
        return 2

    if cfg.experiment == "conv":
        res = run_convergence(cfg)
        text = res.csv
        print(res.table.format())
    elif cfg.experiment == "tau-sweep":
        res = run_tau_sweep(cfg)
        text = res.csv
        print(text, end="")
    elif cfg.experiment == "cr-equiv":
        res = run_cr_equiv(cfg)
        text = res.csv
        print(text, end="")
    else:
        res = run_infsup(cfg)
        text = res.csv
        print(text, end="")
        if res.flagged:
            print(f"warning: beta_h min/max ratio {res.ratio:.3f} is below 0.8", file=sys.stderr)

    path = write_outputs(cfg, text)
    if path is not None:
        print(f"wrote {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
