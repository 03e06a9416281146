#!/usr/bin/env python3
"""Run every config in configs/ (or the ones named) and write a report next to each result set."""

import argparse
import logging
import time
from pathlib import Path

from qubench import runner

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("configs", nargs="*", type=Path, help="config files (default: configs/*.json)")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out-root", type=Path, default=None, help="put each run under this directory")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    for path in args.configs or sorted((ROOT / "configs").glob("*.json")):
        config = runner.ExperimentConfig.load(path)
        out = (args.out_root / config.name) if args.out_root else Path(config.out_dir)
        start = time.perf_counter()
        rows = runner.run_experiment(config, jobs=args.jobs, out_dir=out)
        rep = runner.report(out)
        logging.info("%s: %d rows in %.1fs -> %s", config.name, len(rows), time.perf_counter() - start, out)
        print(rep.summary)


if __name__ == "__main__":
    main()
