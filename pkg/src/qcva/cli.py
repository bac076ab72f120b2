"""qcva command line: bsm, bootstrap, cva and scaling subcommands.

Each run writes CSV tables plus manifest.json into --out.  Exit codes: 0 on
success, 2 on a configuration error, 3 on a calibration or estimation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .credit import CalibrationError, write_curve_json
from .estimators import PreconditionError
from .experiments import (
    BSM_COLUMNS,
    CVA_COLUMNS,
    ConfigError,
    CvaConfig,
    ScalingConfig,
    run_bootstrap,
    run_bsm,
    run_cva,
    run_scaling,
)
from .io import write_json, write_table
from .qsim.state import NormError

log = logging.getLogger("qcva")

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 2, 3


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def cmd_bsm(args, cfg, out: Path) -> dict:
    rows = run_bsm(cfg)
    write_table(rows, out / "bsm.csv", BSM_COLUMNS)
    return {"outputs": ["bsm.csv"], "rows": len(rows)}


def cmd_bootstrap(args, cfg, out: Path) -> dict:
    curve, hazard_rows, phi_rows = run_bootstrap(cfg)
    write_table(hazard_rows, out / "hazard.csv")
    write_table(phi_rows, out / "default_probs.csv")
    write_curve_json(curve, out / "curve.json")
    return {"outputs": ["hazard.csv", "default_probs.csv", "curve.json"], "max_residual": max(abs(r["residual"]) for r in hazard_rows)}


def cmd_cva(args, cfg, out: Path) -> dict:
    c = CvaConfig.from_dict(cfg)
    rows, traces = run_cva(c, args.trials, args.seed, args.backend)
    write_table(rows, out / "cva.csv", CVA_COLUMNS)
    queries: dict = {}
    for tr in traces:
        for k, v in tr["queries"].items():
            queries[k] = queries.get(k, 0) + v
    return {"outputs": ["cva.csv"], "queries": queries, "traces": traces}


def cmd_scaling(args, cfg, out: Path) -> dict:
    c = ScalingConfig.from_dict(cfg)
    points, slopes = run_scaling(c, args.trials, args.seed, args.backend)
    write_table(points, out / "scaling.csv", ["method", "epsilon", "mean_queries", "mean_rel_error", "trials"])
    write_table(slopes, out / "slopes.csv", ["method", "slope", "stderr", "points"])
    for s in slopes:
        log.info("%s: slope %.3f +- %.3f", s["method"], s["slope"], s["stderr"])
    return {"outputs": ["scaling.csv", "slopes.csv"], "slopes": slopes}


COMMANDS = {"bsm": cmd_bsm, "bootstrap": cmd_bootstrap, "cva": cmd_cva, "scaling": cmd_scaling}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcva", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.add_argument("--trials", type=int, default=1)
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--backend", choices=["amp", "full"], default="amp", help="amplitude-estimation engine")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QCVA_LOG", "error").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.trials < 1:
            raise ConfigError("--trials must be at least 1")
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        info = COMMANDS[args.command](args, cfg, out)
        manifest = {
            "command": args.command,
            "config": cfg,
            "version": __version__,
            "seed": args.seed,
            "trials": args.trials,
            "backend": args.backend,
            "wall_time_s": time.perf_counter() - t0,
            **info,
        }
        write_json(manifest, out / "manifest.json")
    except ConfigError as exc:
        log.error("config error: %s", exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, PreconditionError, NormError, ValueError, ArithmeticError) as exc:
        log.error("failure: %s", exc)
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
