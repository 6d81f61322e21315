#!/usr/bin/env python3
"""
Run the acceptance campaigns and print a PASS/FAIL table.

Usage:
    python scripts/run_acceptance.py [--scale 0.1] [--only identities,mean]
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Tuple

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.analyzers.walk_oracle import TestFunction, ballot_probability, many_to_one_compare  # noqa: E402
from src.enums import SimulationMode  # noqa: E402
from src.output.formatter import OutputFormatter  # noqa: E402
from src.services import experiments  # noqa: E402
from src.services.identities import run_identities  # noqa: E402
from src.services.trial_runner import TrialRunner  # noqa: E402
from src.simulation.cascade import simulate  # noqa: E402
from src.simulation.seeding import TAG_AUX, TreeStreams, derive_generator  # noqa: E402
from src.simulation.weights import ModelParams, criticality_check  # noqa: E402

logger = logging.getLogger("acceptance")

BOUNDARY = ModelParams(0.7, 0.3)
INTERIOR = ModelParams(0.3, 0.3)

Outcome = Tuple[bool, str]


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--scale", type=float, default=1.0, help="multiply every trial budget")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--only", type=str, default="", help="comma separated campaign names")
    parser.add_argument("--log-level", default="INFO")
    return parser.parse_args()


class Campaigns:
    def __init__(self, scale: float, seed: int, runner: TrialRunner) -> None:
        self.scale = scale
        self.seed = seed
        self.runner = runner

    def trials(self, budget: int, floor: int = 100) -> int:
        return max(floor, int(budget * self.scale))

    def identities(self) -> Outcome:
        result = run_identities(BOUNDARY, 12, seed=self.seed)
        worst = max(check.max_error / check.tolerance for check in result.checks)
        return not result.identity_violation, f"worst error/tolerance {worst:.2g}"

    def criticality(self) -> Outcome:
        total, derivative = criticality_check(
            self.trials(1_000_000, 1000), derive_generator(self.seed, TAG_AUX, 0, 1), seed=self.seed
        )
        passed = total.within(1.0, 3.0) and derivative.within(0.0, 3.0)
        return passed, f"{total.estimate:.5f}, {derivative.estimate:.5f}"

    def mean(self) -> Outcome:
        rows = [
            experiments.martingale_mean(BOUNDARY, n, self.trials(10_000), seed=self.seed, runner=self.runner)
            for n in (8, 12)
        ]
        return all(row.within(1 + 0j, 3.0) for row in rows), ", ".join(f"{row.estimate:.4f}" for row in rows)

    def many_to_one(self) -> Outcome:
        functions = (TestFunction.one(), TestFunction.identity(), TestFunction.indicator_above(0.0),
                     TestFunction.exp_decay(1.0))
        failures = []
        for F in functions:
            for n in (1, 4, 8, 12):
                for x in (0.0, 1.0, 3.0):
                    lhs, rhs = many_to_one_compare(F, n, x, self.trials(10_000, 1000), seed=self.seed,
                                                   runner=self.runner)
                    if not lhs.agrees_with(rhs, 4.0):
                        failures.append(f"{F.label} n={n} x={x:g}")
        return not failures, "all agree" if not failures else "; ".join(failures)

    def ballot(self) -> Outcome:
        trials = self.trials(100_000, 10_000)
        ratios = [
            ballot_probability(n, 1.0, 0.0, 2.0, trials, seed=self.seed, runner=self.runner).bound_ratio
            for n in (16, 64, 256, 1024)
        ]
        single = ballot_probability(1, 2.0, 0.0, 1.0, trials, seed=self.seed, runner=self.runner)
        passed = max(ratios) / min(ratios) <= 2.0 and single.within(single.extra["closed_form"], 4.0)
        return passed, "ratios " + ", ".join(f"{r:.3g}" for r in ratios)

    def fourth_moment(self) -> Outcome:
        ratios = [
            experiments.fourth_moment(BOUNDARY, n, 2.0, self.trials(10_000), seed=self.seed,
                                      runner=self.runner).bound_ratio
            for n in (4, 8, 12, 16)
        ]
        return max(ratios) / min(ratios) <= 2.0, "ratios " + ", ".join(f"{r:.3g}" for r in ratios)

    def tail_sup(self) -> Outcome:
        grid = (0.5, 1.0, 2.0, 3.0, 4.0)
        peaks = []
        for n in (8, 12):
            rows = experiments.tail_sup(BOUNDARY, n, grid, self.trials(10_000), seed=self.seed, runner=self.runner)
            estimates = [row.estimate for row in rows]
            if any(b > a for a, b in zip(estimates, estimates[1:])):
                return False, f"not monotone at n={n}"
            peaks.append(max(row.bound_ratio for row in rows))
        return max(peaks) / min(peaks) <= 2.0, "max ratios " + ", ".join(f"{p:.3g}" for p in peaks)

    def barrier(self) -> Outcome:
        rows = experiments.barrier_probability((2.0, 4.0, 6.0), 20, self.trials(10_000), seed=self.seed,
                                               runner=self.runner)
        estimates = [row.estimate for row in rows]
        monotone = all(b <= a for a, b in zip(estimates, estimates[1:]))
        return monotone and all(row.truncation for row in rows), "ratios " + ", ".join(
            f"{row.bound_ratio:.3g}" for row in rows
        )

    def modulus(self) -> Outcome:
        trials = self.trials(1_000)
        boundary = experiments.modulus_experiment(BOUNDARY, 18, range(4, 15), trials, seed=self.seed,
                                                  runner=self.runner)
        interior = experiments.modulus_experiment(INTERIOR, 18, range(4, 15), trials, seed=self.seed,
                                                  runner=self.runner)
        boundary_vs_l = next(fit for fit in boundary.fits if "l ln 2" in fit.label)
        interior_vs_l = interior.fits[0]
        passed = boundary.summary["decaying"] and interior_vs_l.slope < boundary_vs_l.slope
        return passed, (f"slope {boundary.summary['slope']:.3g} (r2 {boundary.summary['r_squared']:.2f}); "
                        f"per-level {boundary_vs_l.slope:.3g} vs interior {interior_vs_l.slope:.3g}")

    def variation(self) -> Outcome:
        details = []
        passed = True
        for n in (8, 12, 16):
            result = experiments.variation_experiment(BOUNDARY, n, self.trials(10_000), seed=self.seed,
                                                      runner=self.runner)
            passed = passed and result.summary["closed_form_within_3se"] and result.summary["strictly_increasing"]
            details.append(f"n={n}: {result.rows[-1].estimate:.4g}")
        return passed, "; ".join(details)

    def engineering(self) -> Outcome:
        breadth = simulate(None, 14, TreeStreams(self.seed, 0))
        cursor = simulate(None, 14, TreeStreams(self.seed, 0), SimulationMode.STREAM)
        identical = all(leaf.v == breadth.v[leaf.index] and leaf.x == breadth.x[leaf.index] for leaf in cursor)
        single = experiments.martingale_mean(BOUNDARY, 8, 512, seed=self.seed, runner=TrialRunner(threads=1))
        pooled = experiments.martingale_mean(BOUNDARY, 8, 512, seed=self.seed, runner=TrialRunner(threads=4))
        same = single.estimate == pooled.estimate and single.std_error == pooled.std_error
        return identical and same, f"mode equivalence {identical}, thread invariance {same}"


def main() -> int:
    args = parse_args()
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO))
    campaigns = Campaigns(args.scale, args.seed, TrialRunner(threads=args.threads))
    table: Dict[str, Callable[[], Outcome]] = {
        "identities": campaigns.identities,
        "criticality": campaigns.criticality,
        "mean": campaigns.mean,
        "many_to_one": campaigns.many_to_one,
        "ballot": campaigns.ballot,
        "fourth_moment": campaigns.fourth_moment,
        "tail_sup": campaigns.tail_sup,
        "barrier": campaigns.barrier,
        "modulus": campaigns.modulus,
        "variation": campaigns.variation,
        "engineering": campaigns.engineering,
    }
    selected = [name.strip() for name in args.only.split(",") if name.strip()] or list(table)
    unknown = [name for name in selected if name not in table]
    if unknown:
        logger.error("Unknown campaigns: %s", ", ".join(unknown))
        return 2

    formatter = OutputFormatter()
    results: List[Tuple[str, bool, str, float]] = []
    for name in selected:
        started = time.perf_counter()
        passed, detail = table[name]()
        results.append((name, passed, detail, time.perf_counter() - started))
        logger.info("%s %s (%.1fs)", name, "passed" if passed else "FAILED", results[-1][3])

    print("=" * 80)
    for name, passed, detail, seconds in results:
        print(f"{formatter.verdict(passed)}  {name:<14} {seconds:7.1f}s  {detail}")
    print("=" * 80)
    return 0 if all(passed for _, passed, _, _ in results) else 1


if __name__ == "__main__":
    sys.exit(main())
