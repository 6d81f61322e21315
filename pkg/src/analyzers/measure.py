"""
Partial-sum process t -> M_n[0, t] of a simulated cascade, its exact
structural identities, and the path functionals built on it
(ray-wise sup, block oscillations, scale-l total variation).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import stats as scipy_stats

from src.analyzers import geometry
from src.enums import DiameterMode
from src.simulation.cascade import Leaf, LevelState, StreamCursor
from src.simulation.weights import ModelParams, leaf_weight
from src.utils.statistics import compensated_prefix_sums

logger = logging.getLogger(__name__)

# Two-sample Kolmogorov-Smirnov coefficient c(alpha) at alpha = 1%.
KS_COEFFICIENT_1PCT = 1.628

LeafSource = Union[LevelState, StreamCursor, Iterable[Any]]


class StreamOrderError(ValueError):
    """Raised when leaves do not arrive in dyadic left-to-right order."""


class DepthMismatchError(ValueError):
    """Raised when inputs come from inconsistent depths or an index is out of range."""


@dataclass
class PartialSumProcess:
    """``sums[k] = M_n[0, k / 2^n]`` for k = 0 .. 2^n."""

    depth: int
    sums: np.ndarray
    params: ModelParams

    def __post_init__(self) -> None:
        if self.sums.shape != (2 ** self.depth + 1,):
            raise DepthMismatchError(f"a depth-{self.depth} process needs {2 ** self.depth + 1} sums")

    @property
    def total(self) -> complex:
        return complex(self.sums[-1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.sums)

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.sums.shape[0], dtype=np.float64) / (self.sums.shape[0] - 1)

    def block_width(self, l: int) -> int:
        _check_level(self, l)
        return 2 ** (self.depth - l)


@dataclass
class SupFunctional:
    """Ray-wise sum of subtree mass moduli, maximised over the depth-``n`` leaves."""

    value: float
    n: int
    p: int


class BlockOscillation(NamedTuple):
    diameters: np.ndarray
    lo: float
    hi: float
    approximate: bool


class KSResult(NamedTuple):
    statistic: float
    pvalue: float
    critical_value: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical_value


def _check_level(proc: PartialSumProcess, l: int) -> None:
    if l < 0 or l > proc.depth:
        raise DepthMismatchError(f"level {l} outside [0, {proc.depth}]")


def _depth_of(count: int) -> int:
    depth = count.bit_length() - 1
    if count < 1 or 2 ** depth != count:
        raise DepthMismatchError(f"{count} leaves is not a power of two")
    return depth


def _prefix_sums(weights: np.ndarray) -> np.ndarray:
    real = compensated_prefix_sums(np.ascontiguousarray(weights.real))
    imag = compensated_prefix_sums(np.ascontiguousarray(weights.imag))
    return real + 1j * imag


def _collect_leaves(leaves: Iterable[Any]):
    """Read (index, v, x) from leaves or tuples, enforcing 0, 1, 2, ... order."""
    if isinstance(leaves, StreamCursor):
        size = 2 ** leaves.depth
        v = np.empty(size)
        x = np.empty(size)
    else:
        v_list: List[float] = []
        x_list: List[float] = []

    expected = 0
    for leaf in leaves:
        if isinstance(leaf, Leaf):
            index, leaf_v, leaf_x = leaf.index, leaf.v, leaf.x
        elif len(leaf) == 3:
            index, leaf_v, leaf_x = leaf
        else:
            index, _, leaf_v, leaf_x = leaf
        if index != expected:
            raise StreamOrderError(f"expected leaf {expected}, received leaf {index}")
        if isinstance(leaves, StreamCursor):
            v[expected] = leaf_v
            x[expected] = leaf_x
        else:
            v_list.append(leaf_v)
            x_list.append(leaf_x)
        expected += 1

    if not isinstance(leaves, StreamCursor):
        v = np.asarray(v_list, dtype=np.float64)
        x = np.asarray(x_list, dtype=np.float64)
    return _depth_of(expected), v, x


def partial_sums(leaves: LeafSource, params: ModelParams) -> PartialSumProcess:
    """Compensated prefix sums of the leaf weights, in one pass over the leaves."""
    if isinstance(leaves, LevelState):
        depth, v, x = leaves.depth, leaves.v, leaves.x
    else:
        depth, v, x = _collect_leaves(leaves)
    sums = _prefix_sums(leaf_weight(params, v, x))
    return PartialSumProcess(depth=depth, sums=sums, params=params)


class StreamTotals(NamedTuple):
    total: complex
    modulus_sum: float
    leaves: int


def stream_totals(leaves: Iterable[Any], params: ModelParams) -> StreamTotals:
    """
    Total mass M_n and sum of leaf moduli from a leaf stream, with O(1)
    state and compensated accumulation.
    """
    sums = [0.0, 0.0, 0.0]
    carries = [0.0, 0.0, 0.0]
    expected = 0
    for leaf in leaves:
        index = leaf.index if isinstance(leaf, Leaf) else leaf[0]
        if index != expected:
            raise StreamOrderError(f"expected leaf {expected}, received leaf {index}")
        v, x = (leaf.v, leaf.x) if isinstance(leaf, Leaf) else (leaf[-2], leaf[-1])
        modulus = math.exp(-params.gamma * v)
        phase = params.imag_scale * x
        for slot, value in enumerate((modulus * math.cos(phase), modulus * math.sin(phase), modulus)):
            total = sums[slot]
            updated = total + value
            if abs(total) >= abs(value):
                carries[slot] += (total - updated) + value
            else:
                carries[slot] += (value - updated) + total
            sums[slot] = updated
        expected += 1
    _depth_of(expected)
    return StreamTotals(
        complex(sums[0] + carries[0], sums[1] + carries[1]),
        sums[2] + carries[2],
        expected,
    )


def _relative_error(error: float, scale: float) -> float:
    if error == 0.0:
        return 0.0
    return error / scale if scale > 0.0 else math.inf


def verify_cascade_recursion(
    parent: PartialSumProcess,
    masses: Sequence[complex],
    first_gen: LevelState,
) -> float:
    """
    Check M_{n+1} restricted to each half against T(z) M(z), z the two
    depth-1 nodes, on shared randomness. Returns the larger of the two
    errors relative to the half's absolute mass (sum of leaf moduli).
    """
    if first_gen.depth != 1 or len(masses) != 2 or parent.depth < 1:
        raise DepthMismatchError("cascade recursion needs a depth >= 1 process, two masses and generation 1")

    half = 2 ** (parent.depth - 1)
    moduli = np.abs(parent.increments)
    worst = 0.0
    for side in (0, 1):
        restricted = parent.sums[(side + 1) * half] - parent.sums[side * half]
        factor = leaf_weight(parent.params, first_gen.v[side], first_gen.x[side])
        recombined = complex(factor) * complex(masses[side])
        scale = float(moduli[side * half:(side + 1) * half].sum())
        worst = max(worst, _relative_error(abs(restricted - recombined), scale))
    return worst


def verify_left_decomposition(
    levels: Mapping[int, LevelState],
    u: int,
    params: ModelParams,
    proc: Optional[PartialSumProcess] = None,
) -> float:
    """
    Compare M_n[0, t_u] from the prefix sums with the sum, over the
    ancestors of leaf ``u`` where the ray steps right, of
    T(left sibling) * M_n(left sibling). ``levels`` holds generations 0..n
    of one tree. Returns the absolute discrepancy.
    """
    n = max(levels)
    missing = [d for d in range(n + 1) if d not in levels]
    if missing:
        raise DepthMismatchError(f"left decomposition needs every generation; missing {missing}")
    if not 0 <= u < 2 ** n:
        raise DepthMismatchError(f"leaf index {u} outside [0, {2 ** n})")
    leaves = levels[n]
    if proc is None:
        proc = partial_sums(leaves, params)
    elif proc.depth != n:
        raise DepthMismatchError(f"process depth {proc.depth} differs from tree depth {n}")

    decomposition = 0j
    for k in range(n):
        node = u >> (n - k - 1)
        if not node & 1:
            continue
        sibling = node - 1
        width = 2 ** (n - k - 1)
        block = slice(sibling * width, (sibling + 1) * width)
        ancestor = levels[k + 1]
        relative = leaf_weight(
            params,
            leaves.v[block] - ancestor.v[sibling],
            leaves.x[block] - ancestor.x[sibling],
        ).sum()
        decomposition += complex(leaf_weight(params, ancestor.v[sibling], ancestor.x[sibling])) * relative
    return abs(complex(proc.sums[u]) - decomposition)


def sup_functional(proc: PartialSumProcess, n: int) -> SupFunctional:
    """
    ||M_{n,p}||_inf with p = proc.depth - n, in one depth-first pass over
    the 2^n leaves carrying the left-sibling contributions of the ray.
    """
    p = proc.depth - n
    if n < 0 or p < 0:
        raise DepthMismatchError(f"need 0 <= n <= {proc.depth} (got n={n})")
    re = np.ascontiguousarray(proc.sums.real)
    im = np.ascontiguousarray(proc.sums.imag)
    return SupFunctional(value=float(geometry.ray_sup(re, im, 0, n, p)), n=n, p=p)


def sup_functional_stream(leaves: Iterable[Any], n: int, p: int, params: ModelParams) -> SupFunctional:
    """
    Same functional from a depth ``n + p`` leaf stream, keeping only the
    block start sums and ray contributions of the current path.
    """
    unit = 2 ** p
    starts = [0j] * (n + 1)
    contrib = [0.0] * (n + 1)
    running_sum = 0j
    best = 0.0
    expected = 0
    for leaf in leaves:
        index = leaf.index if isinstance(leaf, Leaf) else leaf[0]
        if index != expected:
            raise StreamOrderError(f"expected leaf {expected}, received leaf {index}")
        if index % unit == 0:
            j = index // unit
            first = 1 if j == 0 else n - ((j & -j).bit_length() - 1)
            for d in range(first, n + 1):
                node = j >> (n - d)
                contrib[d] = abs(running_sum - starts[d]) if node & 1 else 0.0
                starts[d] = running_sum
        v, x = (leaf.v, leaf.x) if isinstance(leaf, Leaf) else (leaf[-2], leaf[-1])
        running_sum += complex(leaf_weight(params, v, x))
        expected += 1
        if expected % unit == 0:
            candidate = sum(contrib[1:]) + abs(running_sum - starts[n])
            best = max(best, candidate)
    if expected != 2 ** (n + p):
        raise DepthMismatchError(f"expected {2 ** (n + p)} leaves, received {expected}")
    return SupFunctional(value=best, n=n, p=p)


def block_oscillations(
    proc: PartialSumProcess,
    l: int,
    mode: DiameterMode = DiameterMode.EXACT,
) -> BlockOscillation:
    """
    Diameters of the path pieces over the 2^l dyadic blocks of level ``l``.

    Any window of length at most 2^-l straddles two adjacent blocks, so the
    dyadic-grid modulus lies in [max diameter, 2 * max diameter]; ``hi``
    reports the looser 3 * max diameter. The bounding-box mode divides its
    diagonals by sqrt(2) for ``lo`` and is flagged approximate.
    """
    width = proc.block_width(l)
    re = np.ascontiguousarray(proc.sums.real)
    im = np.ascontiguousarray(proc.sums.imag)
    if mode is DiameterMode.BBOX:
        diagonals = geometry.block_bbox_diagonals(re, im, width)
        peak = float(diagonals.max())
        return BlockOscillation(diagonals, peak / math.sqrt(2.0), 3.0 * peak, True)
    diameters = geometry.block_diameters(re, im, width)
    peak = float(diameters.max())
    return BlockOscillation(diameters, peak, 3.0 * peak, False)


def windowed_sup_bruteforce(proc: PartialSumProcess, l: int) -> float:
    """Exact max of |sums[k] - sums[j]| over 0 <= k - j <= 2^(n-l); O(N * W)."""
    width = proc.block_width(l)
    return float(geometry.windowed_sup(
        np.ascontiguousarray(proc.sums.real), np.ascontiguousarray(proc.sums.imag), width
    ))


def block_sup_bound(proc: PartialSumProcess, l: int) -> float:
    """3 * max over |u| = l of e^{-gamma V(u)} ||M(u)||_inf, the ray-wise upper bound on the level-l modulus."""
    _check_level(proc, l)
    per_block = geometry.block_ray_sups(
        np.ascontiguousarray(proc.sums.real), np.ascontiguousarray(proc.sums.imag), proc.depth, l
    )
    return 3.0 * float(per_block.max())


def total_variation(proc: PartialSumProcess, l: int) -> float:
    """Sum over the 2^l level-l blocks of |increment|."""
    width = proc.block_width(l)
    return float(np.abs(np.diff(proc.sums[::width])).sum())


def verify_variation_cascade(
    leaf_level: LevelState,
    first_gen: LevelState,
    params: ModelParams,
    l: int,
) -> float:
    """
    TV_{n+1}(l+1) = e^{-gamma V(0)} TV^(0)(l) + e^{-gamma V(1)} TV^(1)(l),
    TV^(z) the scale-l variation of the path built from weights relative
    to z. Returns the relative error.
    """
    if first_gen.depth != 1 or leaf_level.depth < 1:
        raise DepthMismatchError("variation cascade needs generation 1 and a depth >= 1 level")
    n = leaf_level.depth - 1
    if not 0 <= l <= n:
        raise DepthMismatchError(f"level {l} outside [0, {n}]")

    whole = total_variation(partial_sums(leaf_level, params), l + 1)
    half = 2 ** n
    recombined = 0.0
    for side in (0, 1):
        block = slice(side * half, (side + 1) * half)
        relative = leaf_weight(
            params,
            leaf_level.v[block] - first_gen.v[side],
            leaf_level.x[block] - first_gen.x[side],
        )
        child = PartialSumProcess(depth=n, sums=_prefix_sums(relative), params=params)
        recombined += math.exp(-params.gamma * first_gen.v[side]) * total_variation(child, l)
    return _relative_error(abs(whole - recombined), whole)


def recombined_mass(masses: Sequence[complex], first_gen: LevelState, params: ModelParams) -> complex:
    """Sum over the two depth-1 nodes z of T(z) M(z)."""
    factors = leaf_weight(params, first_gen.v, first_gen.x)
    return complex((factors * np.asarray(masses)).sum())


def smoothing_transform_ks(direct: Sequence[float], recombined: Sequence[float]) -> KSResult:
    """Two-sample Kolmogorov-Smirnov comparison at the 1% level."""
    direct = np.asarray(direct, dtype=np.float64)
    recombined = np.asarray(recombined, dtype=np.float64)
    result = scipy_stats.ks_2samp(direct, recombined)
    n, m = direct.shape[0], recombined.shape[0]
    critical = KS_COEFFICIENT_1PCT * math.sqrt((n + m) / (n * m))
    return KSResult(float(result.statistic), float(result.pvalue), critical)


def to_csv(proc: PartialSumProcess, path: Union[str, Path]) -> Path:
    """Write ``k, t, re, im`` rows of the partial-sum process."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "t", "re", "im"])
        for k, (t, value) in enumerate(zip(proc.positions, proc.sums)):
            writer.writerow([k, repr(float(t)), repr(float(value.real)), repr(float(value.imag))])
    return path


def summary(
    proc: PartialSumProcess,
    levels: Optional[Iterable[int]] = None,
    mode: DiameterMode = DiameterMode.EXACT,
) -> Dict[str, Any]:
    """Total mass, TV per level and oscillation brackets per level."""
    grid = list(range(proc.depth + 1)) if levels is None else list(levels)
    brackets = {}
    for l in grid:
        osc = block_oscillations(proc, l, mode)
        brackets[str(l)] = {"lo": osc.lo, "hi": osc.hi, "approximate": osc.approximate}
    return {
        "depth": proc.depth,
        "params": proc.params.as_dict(),
        "total_mass": {"re": proc.total.real, "im": proc.total.imag},
        "total_variation": {str(l): total_variation(proc, l) for l in grid},
        "oscillation": brackets,
    }
