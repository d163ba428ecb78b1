"""Command line: ``rhombic-transport run|validate|bands``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .experiment import PRESETS, ConfigError, ScenarioConfig, kappa_grid, preset, run, validate
from .lattice import bloch_bands
from .lindblad import DivergenceError, SteadyStateError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _load(path: str):
    with open(path) as fh:
        return json.load(fh)


def _cmd_run(args) -> int:
    if args.config:
        try:
            cfg = ScenarioConfig.from_dict(_load(args.config))
        except ConfigError as exc:
            for d in exc.diagnostics:
                print(d, file=sys.stderr)
            return EXIT_CONFIG
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.out:
            cfg.output_path = args.out
        if args.seed is not None and cfg.twa is not None:
            cfg.twa.seed = args.seed
    else:
        cfg = preset(args.preset, out=args.out, seed=args.seed)
    if args.n_traj is not None:
        if cfg.twa is None:
            print("error: --n-traj: scenario has no TWA settings", file=sys.stderr)
            return EXIT_CONFIG
        cfg.twa.n_traj = args.n_traj
    if args.workers is not None and cfg.twa is not None:
        cfg.twa.workers = args.workers
    try:
        result = run(cfg)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_CONFIG
    except (SteadyStateError, DivergenceError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for path in result.files.values():
        print(path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        raw = _load(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    diags = validate(raw)
    for d in diags:
        print(d)
    return EXIT_CONFIG if any(d.level == "error" for d in diags) else EXIT_OK


def _cmd_bands(args) -> int:
    print("kappa,eps_minus,eps_zero,eps_plus")
    for k in kappa_grid(args.kpoints):
        e0, em, ep = bloch_bands(args.phi, k, args.J)
        print(",".join(repr(float(v)) for v in (k, em, e0, ep)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rhombic-transport", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario from a config file or a figure preset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON scenario config")
    src.add_argument("--preset", choices=PRESETS)
    p.add_argument("--out", help="output directory (overrides output_path)")
    p.add_argument("--seed", type=int, help="master seed for TWA scenarios")
    p.add_argument("--n-traj", type=int, help="override the number of trajectories")
    p.add_argument("--workers", type=int, help="threads for trajectory batches")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a config file without running it")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("bands", help="print the three Bloch bands as CSV")
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--kpoints", type=int, default=64)
    p.add_argument("--J", type=float, default=1.0)
    p.set_defaults(func=_cmd_bands)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
