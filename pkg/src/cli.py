"""
Command-line front end: parses a run configuration, dispatches the
experiment and writes its report.

Exit codes: 0 success, 1 identity violation, 2 resource or usage error.
"""
from __future__ import annotations

import argparse
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.analyzers import measure
from src.config import Config, ConfigValidationError, parse_float_grid, parse_int_grid
from src.enums import DiameterMode, ExperimentName, OutputFormat, SimulationMode
from src.output.formatter import OutputFormatter
from src.output.report_writer import ReportWriteError, build_body, write_json, write_report
from src.services import experiments
from src.services.identities import run_identities
from src.services.trial_runner import TrialRunner
from src.simulation.cascade import CapacityError, dump_level, simulate
from src.simulation.seeding import UINT64_MAX
from src.simulation.weights import ModelParams, ParameterError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IDENTITY_VIOLATION = 1
EXIT_RESOURCE_ERROR = 2

# Parameter pairs for the MC check of E[M_1] against its closed form.
MEAN_FACTOR_GRID = ((0.7, 0.3), (0.3, 0.3), (0.0, 0.0), (1.0, 0.0), (0.6, 0.4), (0.8, 0.2))

# Experiments that can run from a leaf stream.
STREAM_CAPABLE = {ExperimentName.MEAN, ExperimentName.VARIATION, ExperimentName.MANY_TO_ONE}


@dataclass
class RunConfig:
    """Everything a run depends on; embedded in its report."""

    experiment: ExperimentName
    gamma: float = Config.DEFAULT_GAMMA
    beta: float = Config.DEFAULT_BETA
    depth: int = Config.DEFAULT_DEPTH
    trials: int = Config.DEFAULT_TRIALS
    seed: int = Config.DEFAULT_SEED
    epsilon0: float = Config.DEFAULT_EPSILON0
    x_grid: List[float] = field(default_factory=lambda: list(Config.DEFAULT_X_GRID))
    l_grid: List[int] = field(default_factory=lambda: list(Config.DEFAULT_L_GRID))
    n_grid: List[int] = field(default_factory=list)
    output: Optional[Path] = None
    fmt: OutputFormat = OutputFormat.JSON
    mode: SimulationMode = SimulationMode.BREADTH
    threads: Optional[int] = None
    kappa: float = 0.4
    a: float = 0.0
    b: float = math.inf
    x: float = 0.0
    horizon: int = 64
    diameter_mode: DiameterMode = DiameterMode.EXACT
    sup_bound: bool = False
    walk_bound: bool = False
    early_stop: bool = True
    dump_dir: Optional[Path] = None

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.gamma, self.beta)

    @property
    def output_path(self) -> Path:
        if self.output is not None:
            return Path(self.output)
        return Path(Config.OUTPUT_DIR) / f"{self.experiment.value}.{self.fmt.value}"

    def to_dict(self) -> Dict[str, Any]:
        """Serializable form; output locations and thread count do not affect results and are left out."""
        data = asdict(self)
        data.pop("output")
        data.pop("threads")
        data.pop("dump_dir")
        for key, value in data.items():
            if hasattr(value, "value"):
                data[key] = value.value
        return data


def _float_grid(raw: str) -> List[float]:
    grid = parse_float_grid(raw)
    if not grid:
        raise argparse.ArgumentTypeError(f"invalid grid: {raw!r}")
    return grid


def _int_grid(raw: str) -> List[int]:
    grid = parse_int_grid(raw)
    if not grid:
        raise argparse.ArgumentTypeError(f"invalid grid: {raw!r}")
    return grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=Config.APPNAME,
        description="Simulate the complex branching random walk on the binary tree and run verification campaigns.",
    )
    parser.add_argument("--experiment", required=True, choices=ExperimentName.allowed_values())
    parser.add_argument("--gamma", type=float, default=Config.DEFAULT_GAMMA)
    parser.add_argument("--beta", type=float, default=Config.DEFAULT_BETA)
    parser.add_argument("--depth", type=int, default=Config.DEFAULT_DEPTH, help="tree depth n")
    parser.add_argument("--trials", type=int, default=Config.DEFAULT_TRIALS)
    parser.add_argument("--seed", type=int, default=Config.DEFAULT_SEED, help="64-bit unsigned master seed")
    parser.add_argument("--epsilon0", type=float, default=Config.DEFAULT_EPSILON0)
    parser.add_argument("--x-grid", type=_float_grid, default=None, help="e.g. 0.5,1,2,3,4")
    parser.add_argument("--l-grid", type=_int_grid, default=None, help="e.g. 4..14")
    parser.add_argument("--n-grid", type=_int_grid, default=None, help="depth grid, e.g. 4,8,12,16")
    parser.add_argument("--output", type=Path, default=None)
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.JSON.value)
    parser.add_argument("--mode", choices=[m.value for m in SimulationMode], default=SimulationMode.BREADTH.value)
    parser.add_argument("--threads", type=int, default=None, help="worker cap (default: CASCADE_LAB_THREADS)")
    parser.add_argument("--kappa", type=float, default=0.4)
    parser.add_argument("--a", type=float, default=0.0, help="ballot window lower end")
    parser.add_argument("--b", type=float, default=math.inf, help="ballot window upper end")
    parser.add_argument("--x", type=float, default=0.0, help="walk start for the ballot estimate")
    parser.add_argument("--horizon", type=int, default=64)
    parser.add_argument("--fast-diameter", action="store_true", help="bounding-box diameters (approximate)")
    parser.add_argument("--sup-bound", action="store_true", help="also report the ray-wise modulus bound")
    parser.add_argument("--walk-bound", action="store_true", help="also report the first-moment barrier bound")
    parser.add_argument("--no-early-stop", action="store_true")
    parser.add_argument(
        "--dump-dir", type=Path, default=None,
        help="also export trial 0's tree: tree.bin, partial_sums.csv and path_summary.json",
    )
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Parse and validate flags; invalid values exit through argparse with status 2."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.gamma < 0 or args.beta < 0:
        parser.error("--gamma and --beta must be non-negative")
    if args.depth < 0:
        parser.error("--depth must be non-negative")
    if args.trials < 1:
        parser.error("--trials must be at least 1")
    if not 0 <= args.seed <= UINT64_MAX:
        parser.error("--seed must be a 64-bit unsigned integer")
    if not 0 < args.epsilon0 < 0.5:
        parser.error("--epsilon0 must lie in (0, 1/2)")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be at least 1")
    if args.a > args.b:
        parser.error("--a must not exceed --b")

    config = RunConfig(
        experiment=ExperimentName(args.experiment),
        gamma=args.gamma,
        beta=args.beta,
        depth=args.depth,
        trials=args.trials,
        seed=args.seed,
        epsilon0=args.epsilon0,
        x_grid=args.x_grid or list(Config.DEFAULT_X_GRID),
        l_grid=args.l_grid or list(Config.DEFAULT_L_GRID),
        n_grid=args.n_grid or [],
        output=args.output,
        fmt=OutputFormat(args.format),
        mode=SimulationMode(args.mode),
        threads=args.threads,
        kappa=args.kappa,
        a=args.a,
        b=args.b,
        x=args.x,
        horizon=args.horizon,
        diameter_mode=DiameterMode.BBOX if args.fast_diameter else DiameterMode(Config.DIAMETER_MODE),
        sup_bound=args.sup_bound,
        walk_bound=args.walk_bound,
        early_stop=not args.no_early_stop,
        dump_dir=args.dump_dir,
    )
    params = config.params
    if config.experiment.needs_boundary and not params.on_boundary:
        logger.warning(
            "⚠️ %s is stated for the I/II boundary; running at (%s, %s) (%s)",
            config.experiment.value, config.gamma, config.beta, params.phase.label,
        )
    return config


def _stability(rows, key_fn) -> Dict[str, Any]:
    """max/min of bound ratios per key across depths; uniformity in n means within a factor 2."""
    groups: Dict[Any, List[float]] = {}
    for row in rows:
        if row.bound_ratio is not None and row.bound_ratio > 0:
            groups.setdefault(key_fn(row), []).append(row.bound_ratio)
    spreads = {str(k): max(v) / min(v) for k, v in groups.items() if len(v) > 1}
    return {"ratio_spread": spreads, "stable_within_factor_2": all(s <= 2.0 for s in spreads.values())}


def dispatch(config: RunConfig, runner: TrialRunner) -> experiments.ExperimentResult:
    """Run the configured experiment."""
    name = config.experiment
    params = config.params
    seed = config.seed
    if config.mode is SimulationMode.STREAM and name not in STREAM_CAPABLE:
        logger.warning("⚠️ %s runs in breadth mode only; ignoring --mode stream", name.value)

    if name is ExperimentName.IDENTITIES:
        return run_identities(params, config.depth, seed=seed)

    if name is ExperimentName.CRITICALITY:
        grid = [ModelParams(g, b) for g, b in MEAN_FACTOR_GRID]
        return experiments.criticality_experiment(config.trials, seed=seed, params_grid=grid)

    if name is ExperimentName.MEAN:
        result = experiments.ExperimentResult(name)
        for n in config.n_grid or [config.depth]:
            result.rows.append(experiments.martingale_mean(
                params, n, config.trials, seed=seed, mode=config.mode, runner=runner
            ))
        result.summary = {"within_3se_of_one": all(row.within(1 + 0j, 3.0) for row in result.rows)}
        return result

    if name is ExperimentName.TAIL_SUP:
        result = experiments.ExperimentResult(name)
        for n in config.n_grid or [config.depth]:
            rows = experiments.tail_sup(params, n, config.x_grid, config.trials, seed=seed, runner=runner)
            for row in rows:
                row.extra["n"] = n
            result.rows.extend(rows)
        ratios = [row.bound_ratio for row in result.rows if row.bound_ratio is not None]
        result.summary = {"max_bound_ratio": max(ratios)}
        result.summary.update(_stability(result.rows, lambda row: row.extra["n"]))
        return result

    if name is ExperimentName.FOURTH_MOMENT:
        result = experiments.ExperimentResult(name)
        for n in config.n_grid or [config.depth]:
            for x in config.x_grid:
                result.rows.append(experiments.fourth_moment(params, n, x, config.trials, seed=seed, runner=runner))
        result.summary = _stability(result.rows, lambda row: row.key)
        return result

    if name is ExperimentName.BARRIER:
        result = experiments.ExperimentResult(name)
        result.rows = experiments.barrier_probability(
            config.x_grid, config.depth, config.trials,
            epsilon0=config.epsilon0, seed=seed, early_stop=config.early_stop,
            walk_bound=config.walk_bound, runner=runner,
        )
        result.summary = {"max_bound_ratio": max(row.bound_ratio for row in result.rows)}
        return result

    if name is ExperimentName.MODULUS:
        return experiments.modulus_experiment(
            params, config.depth, config.l_grid, config.trials, seed=seed,
            diameter_mode=config.diameter_mode, sup_bound=config.sup_bound, runner=runner,
        )

    if name is ExperimentName.VARIATION:
        return experiments.variation_experiment(
            params, config.depth, config.trials, seed=seed, mode=config.mode, runner=runner
        )

    if name is ExperimentName.MANY_TO_ONE:
        return experiments.many_to_one_experiment(
            config.depth, config.x_grid, config.trials, seed=seed, mode=config.mode, runner=runner
        )

    if name is ExperimentName.BALLOT:
        return experiments.ballot_experiment(
            config.n_grid or [config.depth], config.x, config.a, config.b, config.trials, seed=seed, runner=runner
        )

    if name is ExperimentName.EXP_SUM:
        return experiments.exp_sum_experiment(
            config.kappa, config.x_grid, config.horizon, config.trials, seed=seed, runner=runner
        )

    return experiments.smoothing_transform_experiment(params, config.depth, config.trials, seed=seed, runner=runner)


def build_report_body(config: RunConfig, result: experiments.ExperimentResult) -> Dict[str, Any]:
    return build_body(
        experiment=config.experiment.value,
        params={"gamma": config.gamma, "beta": config.beta, "epsilon0": config.epsilon0},
        n=config.depth,
        trials=config.trials,
        seed=config.seed,
        config=config.to_dict(),
        rows=result.table(),
        fits=[fit.to_row() for fit in result.fits],
        summary=result.summary,
    )


def export_tree(config: RunConfig) -> Path:
    """
    Write trial 0's depth-n tree to ``config.dump_dir``: the binary leaf dump,
    the partial-sum path as CSV and its TV / oscillation summary as JSON.
    """
    directory = Path(config.dump_dir)
    params = config.params
    level = simulate(params, config.depth, experiments.tree_streams(config.seed, 0), epsilon0=config.epsilon0)
    proc = measure.partial_sums(level, params)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        dump_level(level, directory / "tree.bin", params, seed=config.seed)
        measure.to_csv(proc, directory / "partial_sums.csv")
    except OSError as exc:
        raise ReportWriteError(directory, exc) from exc
    write_json(directory / "path_summary.json", measure.summary(proc, mode=config.diameter_mode))
    logger.info("📦 Tree of depth %s exported to %s", config.depth, directory)
    return directory


def run(config: RunConfig, formatter: Optional[OutputFormatter] = None) -> int:
    """Run one configuration and write its report; returns the exit code."""
    runner = TrialRunner(threads=config.threads)
    logger.info("🚀 Running %s (n=%s, trials=%s, seed=%s)", config.experiment.value, config.depth,
                config.trials, config.seed)
    try:
        result = dispatch(config, runner)
        body = build_report_body(config, result)
        write_report(config.output_path, body, config.fmt)
        if config.dump_dir is not None:
            export_tree(config)
    except (CapacityError, MemoryError) as exc:
        logger.error("❌ Resource limit: %s", exc)
        return EXIT_RESOURCE_ERROR
    except ReportWriteError as exc:
        logger.error("❌ %s", exc)
        return EXIT_RESOURCE_ERROR
    except (ParameterError, experiments.GridError) as exc:
        logger.error("❌ Invalid parameters: %s", exc)
        return EXIT_RESOURCE_ERROR

    print((formatter or OutputFormatter()).format_report(body))
    if result.identity_violation:
        logger.error("❌ Identity violation: %s", ", ".join(result.summary.get("failed", [])))
        return EXIT_IDENTITY_VIOLATION
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        settings = Config()
    except ConfigValidationError as exc:
        logging.basicConfig(level=logging.ERROR)
        logger.error("❌ Invalid configuration:\n%s", exc)
        return EXIT_RESOURCE_ERROR

    logging.basicConfig(
        format=settings.LOG_FORMAT,
        level=logging.DEBUG if settings.LOG_LEVEL.upper() == "DEBUG" else logging.INFO,
        handlers=[logging.StreamHandler()],
    )
    return run(parse_config(argv))
