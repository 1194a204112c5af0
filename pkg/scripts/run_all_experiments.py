#!/usr/bin/env python3
"""Run the full experiment battery and write one result file per study.

Reproduces every table and figure the package supports, at the default
parameters, into --out (created if missing).  Re-running with the same
--seed produces byte-identical files regardless of --workers.
"""

import argparse
import os
import sys
import time
from pathlib import Path

from tipleak.experiments import (
    exp_decentralized,
    exp_heatmap,
    exp_mitigations,
    exp_mixer,
    exp_realworld,
    exp_variance,
    heatmap_params,
)
from tipleak.results import write_result


def build_jobs(seed: int, workers: int, fast: bool):
    """Yield (name, thunk) pairs; thunks return an ExperimentResult."""
    samples = 200 if fast else 1000
    runs = 20 if fast else 100
    rounds = 20 if fast else 100
    participants = 10_000 if fast else 100_000

    yield "decentralized", lambda: exp_decentralized(
        rounds=rounds, seed=seed, workers=workers
    )
    yield "realworld", lambda: exp_realworld(seed=seed)
    def heatmap_result(placement: str):
        result = exp_heatmap(
            placement, samples_per_cell=samples, seed=seed, workers=workers
        ).to_result(
            heatmap_params(placement=placement, samples_per_cell=samples), seed
        )
        result.name = f"heatmap-{placement}"  # one file per placement
        return result

    for placement in ("uniform_grid", "uniform_random", "clustered"):
        yield f"heatmap ({placement})", lambda p=placement: heatmap_result(p)
    yield "variance", lambda: exp_variance(
        runs=runs, samples_per_cell=samples, seed=seed, workers=workers
    )
    yield "mixer", lambda: exp_mixer(participants=participants, seed=seed)
    yield "mitigations", lambda: exp_mitigations(
        baseline_rounds=rounds * 2,
        scaling_rounds=rounds * 10 if fast else 1000,
        seed=seed,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument(
        "--workers", type=int, default=os.cpu_count() or 1,
        help="parallel workers; never affects results",
    )
    parser.add_argument(
        "--format", choices=("csv", "structured"), default="csv"
    )
    parser.add_argument(
        "--fast", action="store_true",
        help="smaller sample counts for a quick smoke run",
    )
    args = parser.parse_args(argv)

    total_start = time.perf_counter()
    for name, thunk in build_jobs(args.seed, args.workers, args.fast):
        started = time.perf_counter()
        path = write_result(thunk(), args.out, args.format)
        print(f"{name:<26} {time.perf_counter() - started:6.1f}s  -> {path}")
    print(f"total {time.perf_counter() - total_start:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
