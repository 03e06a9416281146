"""``qubench`` command line: generate, run, fit, report, purity."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from . import runner
from .runner import ArchiveError, ConfigError, ExperimentConfig

log = logging.getLogger("qubench")


def _config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    return config.replace(**changes) if changes else config


def _out(args, config: ExperimentConfig | None = None) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(config.out_dir if config is not None else "results")


def cmd_generate(args) -> int:
    config = _config(args)
    path = runner.write_circuits(config, _out(args, config))
    print(path)
    return 0


def cmd_run(args) -> int:
    config = _config(args)
    if not config.noise:
        log.warning("config has an empty noise sweep; writing an empty result set")
    out = _out(args, config)
    rows = runner.run_experiment(config, jobs=args.jobs, out_dir=out)
    failed = [r for r in rows if not r.ok]
    print(f"{len(rows)} rows -> {out / runner.RESULTS_FILE} ({len(failed)} failed)")
    for r in failed:
        print(f"  failed: {r.protocol} {r.noise_kind} {r.strength:g}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_fit(args) -> int:
    source = Path(args.archive) if args.archive else _out(args)
    rows = runner.refit_archive(source, n_bootstrap=args.n_bootstrap)
    out = _out(args) if args.out is not None else (source if source.is_dir() else source.parent)
    out.mkdir(parents=True, exist_ok=True)
    runner.write_results_csv(rows, out / runner.RESULTS_FILE)
    print(f"{len(rows)} rows re-fitted -> {out / runner.RESULTS_FILE}")
    return 0


def cmd_report(args) -> int:
    source = Path(args.archive) if args.archive else _out(args)
    rep = runner.report(source, args.out)
    print(rep.summary)
    return 0


def cmd_purity(args) -> int:
    config = _config(args)
    records = runner.purity_diagnostic(config, jobs=args.jobs)
    out = _out(args, config)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "purity.csv"
    fields = [f.name for f in dataclasses.fields(runner.PurityRecord)]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(dataclasses.asdict(r) for r in records)
    for row in runner.mean_purity(records):
        print(f"{row['noise_kind']:>16s} {row['strength']:<10g} {row['stage']:<6s} {row['mean_purity']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out", help="output directory (defaults to the config's out_dir)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qubench", description="Randomized benchmarking protocol comparison")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write the benchmark circuits (JSON + OpenQASM)") \
        .set_defaults(func=cmd_generate)
    sub.add_parser("run", parents=[common], help="simulate, fit and write results.csv + archive.json") \
        .set_defaults(func=cmd_run)
    fit = sub.add_parser("fit", parents=[common], help="re-fit results from an archive's raw samples")
    fit.add_argument("--archive", help="archive.json or the directory holding it")
    fit.add_argument("--n-bootstrap", type=int, default=None)
    fit.set_defaults(func=cmd_fit)
    rep = sub.add_parser("report", parents=[common], help="per-figure CSVs and a deviation summary")
    rep.add_argument("--archive", help="archive.json or the directory holding it")
    rep.set_defaults(func=cmd_report)
    sub.add_parser("purity", parents=[common], help="DRB purity after state prep and after the full circuit") \
        .set_defaults(func=cmd_purity)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.jobs < 1:
        print("qubench: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, ArchiveError, FileNotFoundError) as exc:
        print(f"qubench: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
