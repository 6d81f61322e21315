"""Exact structural identities of one simulated tree, checked on shared randomness."""
from __future__ import annotations

import logging
from typing import Iterable, List, Sequence

import numpy as np

from src.analyzers import measure
from src.enums import ExperimentName, SimulationMode
from src.services.experiments import ExperimentResult, IdentityCheck, tree_streams
from src.simulation.cascade import simulate, simulate_levels, subtree_masses
from src.simulation.seeding import TAG_AUX, derive_generator
from src.simulation.weights import ModelParams, ParameterError

logger = logging.getLogger(__name__)

RELATIVE_TOLERANCE = 1e-10
INCREMENT_TOLERANCE = 1e-12
DECOMPOSITION_SAMPLES = 100
EQUIVALENCE_MAX_DEPTH = 14


def _scaled(error: float, scale: float) -> float:
    return error / scale if scale > 0 else error


def run_identities(
    params: ModelParams,
    n: int,
    *,
    seed: int = 0,
    trial: int = 0,
    samples: int = DECOMPOSITION_SAMPLES,
    extra_depths: Sequence[int] = (0, 4),
) -> ExperimentResult:
    """
    Evaluate every exact identity on the tree of ``(seed, trial)`` at depth ``n``.
    Errors are relative to the sum of leaf moduli unless noted.
    """
    if n < 1:
        raise ParameterError(f"the identity suite needs depth >= 1 (got {n})")

    levels = simulate_levels(params, n, tree_streams(seed, trial), keep=range(n + 1))
    leaves = levels[n]
    proc = measure.partial_sums(leaves, params)
    weights = leaves.weights(params)
    scale = float(np.abs(weights).sum())
    checks: List[IdentityCheck] = []

    increment_error = float(np.abs(proc.increments - weights).max()) / max(1.0, float(np.abs(proc.sums).max()))
    checks.append(IdentityCheck("prefix-sum increments", increment_error, INCREMENT_TOLERANCE))

    total_error = _scaled(abs(proc.total - complex(weights.sum())), scale)
    checks.append(IdentityCheck("total mass regrouping", total_error, RELATIVE_TOLERANCE))

    masses = subtree_masses(leaves, levels[1], params)
    checks.append(IdentityCheck(
        "cascade recursion",
        measure.verify_cascade_recursion(proc, masses, levels[1]),
        RELATIVE_TOLERANCE,
    ))

    middle = levels[n // 2]
    recombined = complex((middle.weights(params) * subtree_masses(leaves, middle, params)).sum())
    checks.append(IdentityCheck(
        "subtree mass recombination", _scaled(abs(recombined - proc.total), scale), RELATIVE_TOLERANCE
    ))

    rng = derive_generator(seed, TAG_AUX, trial, 4)
    picks = {0, 2 ** n - 1} | {int(u) for u in rng.integers(0, 2 ** n, size=samples)}
    decomposition_error = max(
        measure.verify_left_decomposition(levels, u, params, proc) for u in sorted(picks)
    )
    checks.append(IdentityCheck(
        "left decomposition", _scaled(decomposition_error, scale), RELATIVE_TOLERANCE
    ))

    checks.extend(_triangle_checks(params, n, seed, trial, extra_depths))

    variations = [measure.total_variation(proc, l) for l in range(n + 1)]
    drops = [max(0.0, a - b) / b for a, b in zip(variations, variations[1:]) if b > 0]
    checks.append(IdentityCheck("total variation refinement", max(drops, default=0.0), RELATIVE_TOLERANCE))

    cascade_errors = [
        measure.verify_variation_cascade(leaves, levels[1], params, l) for l in range(n)
    ]
    checks.append(IdentityCheck("variation cascading rule", max(cascade_errors), RELATIVE_TOLERANCE))

    checks.append(_mode_equivalence(min(n, EQUIVALENCE_MAX_DEPTH), seed, trial))

    result = ExperimentResult(ExperimentName.IDENTITIES, checks=checks)
    result.summary = {
        "depth": n,
        "trial": trial,
        "passed": not result.identity_violation,
        "failed": [check.name for check in checks if not check.passed],
    }
    for check in checks:
        log = logger.info if check.passed else logger.error
        log("%s %s: max error %.3g (tolerance %.0e)", "✅" if check.passed else "❌",
            check.name, check.max_error, check.tolerance)
    return result


def _triangle_checks(
    params: ModelParams, n: int, seed: int, trial: int, extra_depths: Iterable[int]
) -> List[IdentityCheck]:
    """max_k |M_{n+p}[0, k 2^-n]| <= ||M_{n,p}||_inf on the tree of depth n + p."""
    checks = []
    for p in extra_depths:
        level = simulate(params, n + p, tree_streams(seed, trial))
        proc = measure.partial_sums(level, params)
        value = measure.sup_functional(proc, n).value
        grid_max = float(np.abs(proc.sums[::2 ** p]).max())
        excess = max(0.0, grid_max - value) / value if value > 0 else grid_max
        checks.append(IdentityCheck(f"triangle comparison p={p}", excess, RELATIVE_TOLERANCE))
    return checks


def _mode_equivalence(depth: int, seed: int, trial: int) -> IdentityCheck:
    breadth = simulate(None, depth, tree_streams(seed, trial), SimulationMode.BREADTH)
    cursor = simulate(None, depth, tree_streams(seed, trial), SimulationMode.STREAM)
    v = np.empty(breadth.size)
    x = np.empty(breadth.size)
    for leaf in cursor:
        v[leaf.index] = leaf.v
        x[leaf.index] = leaf.x
    error = max(float(np.abs(v - breadth.v).max()), float(np.abs(x - breadth.x).max()))
    if cursor.min_so_far != breadth.min_so_far or cursor.barrier_min != breadth.barrier_min:
        error = max(error, abs(cursor.min_so_far - breadth.min_so_far), abs(cursor.barrier_min - breadth.barrier_min))
    return IdentityCheck(f"breadth/stream equivalence n={depth}", error, INCREMENT_TOLERANCE)
