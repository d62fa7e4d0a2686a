"""Command-line entry point: ``cpfabc <subcommand> --config run.yaml``.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 finished
but at least one calibration method failed on some parameter.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cpfabc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, table=True):
        p.add_argument("--config", help="YAML run configuration (defaults when omitted)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--workers", type=int, help="override the worker count")
        p.add_argument("--output", help="output directory (default: config output_dir)")
        if table:
            p.add_argument("--table", help="reference table CSV (default: <output>/table.csv)")

    p = sub.add_parser("simulate", help="generate the reference table")
    common(p)
    p.add_argument("--resume", action="store_true", help="keep valid rows of an interrupted run")
    p.add_argument("--observed", help="also write one synthetic observed dataset here")

    p = sub.add_parser("calibrate", help="run all configured methods on observed counts")
    common(p)
    p.add_argument("--observed", required=True, help="counts CSV: site,year,period,habitat,count")

    p = sub.add_parser("simstudy", help="leave-references-out study on the table")
    common(p)

    p = sub.add_parser("predict", help="intensity maps and posterior predictive checks")
    common(p)
    p.add_argument("--result", required=True, help="posterior CSV written by calibrate")
    p.add_argument("--observed", help="observed counts, for p-values and PCA")

    p = sub.add_parser("report", help="summarise a run directory as markdown")
    p.add_argument("--run-dir", required=True)
    return ap


def _config(args):
    from .config import RunConfig

    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    try:
        return cfg.with_overrides(seed=args.seed, workers=args.workers, output_dir=args.output)
    except Exception as exc:  # pydantic validation
        raise ConfigError(str(exc)) from exc


def _run(args) -> int:
    from . import pipeline as pl
    from .abc import PosteriorResult
    from .obsmodel import Dataset, simulate_dataset

    if args.command == "report":
        print(pl.report(args.run_dir))
        return EXIT_OK
    cfg = _config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table_path = Path(args.table) if getattr(args, "table", None) else out / "table.csv"

    if args.command == "simulate":
        world = pl.build_world(cfg)
        pl._manifest(cfg, out, {"spec_hash": world.spec.hash})
        table = pl.generate_table(cfg, table_path, resume=args.resume, world=world)
        print(f"{table.M} rows x {table.D} statistics -> {table_path}")
        if args.observed:
            from .obsmodel import sample_prior

            psi = sample_prior(world.prior, pl._sub(cfg.seed, 31))
            simulate_dataset(psi, world.design, world.store, pl._sub(cfg.seed, 32)).to_csv(args.observed)
            print(f"observed dataset -> {args.observed}")
        return EXIT_OK

    if args.command == "calibrate":
        table = pl.load_table(table_path)
        observed = Dataset.from_csv(args.observed)
        results = pl.calibrate(cfg, table, observed, out)
        for r in results:
            print(r.label, "failed" if r.any_failed else "ok")
        return EXIT_PARTIAL if any(r.any_failed for r in results) else EXIT_OK

    if args.command == "simstudy":
        table = pl.load_table(table_path)
        rep = pl.simstudy(cfg, table, out)
        print(f"simulation study over {cfg.simstudy.n_ref} references -> {out}")
        return EXIT_PARTIAL if any(r.failed for r in rep.records) else EXIT_OK

    if args.command == "predict":
        result = PosteriorResult.from_csv(args.result)
        observed = Dataset.from_csv(args.observed) if args.observed else None
        table = pl.load_table(table_path) if table_path.exists() else None
        paths = pl.predict(cfg, result, out, observed, table)
        for k, v in paths.items():
            print(f"{k}: {v}")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logging.getLogger("cpfabc").debug("traceback", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
