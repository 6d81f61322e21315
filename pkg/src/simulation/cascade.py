"""
Cascade tree simulation.

Breadth mode keeps one generation at a time (``LevelState``); stream mode
walks the leaves depth first with O(depth) state (``StreamCursor``). Both
read the same per-depth streams from :class:`TreeStreams`, so they produce
identical leaf values for the same seed.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, NamedTuple, Optional, Union

import numpy as np

from src.config import Config
from src.enums import SimulationMode
from src.simulation.seeding import UINT64_MAX, DepthBuffer, TreeStreams
from src.simulation.weights import ModelParams, leaf_weight

logger = logging.getLogger(__name__)

DUMP_MAGIC = b"CLAB"
DUMP_VERSION = 1
# magic, version, depth, gamma, beta, epsilon0, seed
_DUMP_HEADER = struct.Struct("<4sHIdddQ")
_UNKNOWN_SEED = UINT64_MAX

RandomSource = Union[TreeStreams, int]


class CapacityError(RuntimeError):
    """Raised when a breadth-mode generation would exceed the memory cap."""


class DepthError(ValueError):
    """Raised for negative depths or ancestor depths below the leaves."""


def barrier_slope(epsilon0: float) -> float:
    """r(eps0) = 1/2 - eps0."""
    return 0.5 - epsilon0


def _as_streams(rng: RandomSource) -> TreeStreams:
    if isinstance(rng, TreeStreams):
        return rng
    return TreeStreams(int(rng))


def _check_depth(n: int) -> int:
    if int(n) != n or n < 0:
        raise DepthError(f"depth must be a non-negative integer (got {n})")
    return int(n)


def _check_capacity(depth: int, max_depth: Optional[int]) -> None:
    cap = Config.MAX_BREADTH_DEPTH if max_depth is None else max_depth
    if depth > cap:
        raise CapacityError(
            f"breadth mode needs 2^{depth} nodes per generation; cap is depth {cap} (use stream mode)"
        )


@dataclass
class LevelState:
    """One generation of the tree, in dyadic left-to-right order."""

    depth: int
    v: np.ndarray
    x: np.ndarray
    min_so_far: float
    # min over 1 <= |u| <= depth of V(u) - r(eps0) ln|u|; the root is excluded since ln 0 = -inf
    barrier_min: float
    epsilon0: float

    def __post_init__(self) -> None:
        size = 2 ** self.depth
        if self.v.shape != (size,) or self.x.shape != (size,):
            raise DepthError(f"a depth-{self.depth} level needs {size} entries per component")

    @property
    def size(self) -> int:
        return self.v.shape[0]

    @property
    def positions(self) -> np.ndarray:
        """Left endpoints t_u = k / 2^depth."""
        return np.arange(self.size, dtype=np.float64) / self.size

    def barrier_crossed(self, x: float) -> bool:
        """Whether some node with 1 <= |u| <= depth has V(u) <= -x + r(eps0) ln|u|."""
        return bool(self.barrier_min <= -x)

    def barrier_flags(self, x_grid: Iterable[float]) -> Dict[float, bool]:
        return {float(x): self.barrier_crossed(x) for x in x_grid}

    def weights(self, params: ModelParams) -> np.ndarray:
        return leaf_weight(params, self.v, self.x)


class Leaf(NamedTuple):
    index: int
    t: float
    v: float
    x: float


def root_level(epsilon0: Optional[float] = None) -> LevelState:
    """Depth-0 state: the root carries V = X = 0."""
    return LevelState(
        depth=0,
        v=np.zeros(1),
        x=np.zeros(1),
        min_so_far=0.0,
        barrier_min=math.inf,
        epsilon0=Config.DEFAULT_EPSILON0 if epsilon0 is None else epsilon0,
    )


def extend(level: LevelState, rng: RandomSource, *, max_depth: Optional[int] = None) -> LevelState:
    """
    Produce generation ``level.depth + 1``: children ``2k`` and ``2k + 1`` of
    parent ``k`` add fresh increments read at their positions in the
    per-depth streams.
    """
    depth = level.depth + 1
    _check_capacity(depth, max_depth)
    v_inc, x_inc = _as_streams(rng).generation(depth)

    v = np.repeat(level.v, 2) + v_inc
    x = np.repeat(level.x, 2) + x_inc
    generation_min = float(v.min())
    barrier = generation_min - barrier_slope(level.epsilon0) * math.log(depth)
    return LevelState(
        depth=depth,
        v=v,
        x=x,
        min_so_far=min(level.min_so_far, generation_min),
        barrier_min=min(level.barrier_min, barrier),
        epsilon0=level.epsilon0,
    )


class StreamCursor:
    """
    Depth-first leaf iterator with O(depth) state.

    Going from leaf ``i - 1`` to leaf ``i`` replaces the ancestors at depths
    ``depth - tz(i) .. depth`` (``tz`` = trailing zero bits); every depth
    therefore meets its nodes in index order and reads its stream
    sequentially. ``min_so_far`` and ``barrier_min`` cover the nodes seen
    so far and are final once ``finished`` is set.
    """

    def __init__(
        self,
        depth: int,
        rng: RandomSource,
        *,
        epsilon0: Optional[float] = None,
        buffer_size: Optional[int] = None,
    ) -> None:
        self.depth = _check_depth(depth)
        self.epsilon0 = Config.DEFAULT_EPSILON0 if epsilon0 is None else epsilon0
        streams = _as_streams(rng)
        size = Config.STREAM_BUFFER if buffer_size is None else buffer_size
        self._buffers: List[Optional[DepthBuffer]] = [None] + [
            streams.buffered(d, size) for d in range(1, self.depth + 1)
        ]
        self._slope = barrier_slope(self.epsilon0)
        self._log_depth = [0.0] + [math.log(d) for d in range(1, self.depth + 1)]
        self.partial_v = [0.0] * (self.depth + 1)
        self.partial_x = [0.0] * (self.depth + 1)
        self.path: List[int] = [0] * self.depth
        self.min_so_far = 0.0
        self.barrier_min = math.inf
        self.finished = False
        self._next_index = 0
        self._count = 2 ** self.depth

    def __iter__(self) -> Iterator[Leaf]:
        return self

    def __next__(self) -> Leaf:
        i = self._next_index
        if i >= self._count:
            self.finished = True
            raise StopIteration

        n = self.depth
        if i == 0:
            first = 1
        else:
            first = n - ((i & -i).bit_length() - 1)
        for d in range(first, n + 1):
            v_inc, x_inc = self._buffers[d].next()
            v = self.partial_v[d - 1] + v_inc
            self.partial_v[d] = v
            self.partial_x[d] = self.partial_x[d - 1] + x_inc
            self.path[d - 1] = (i >> (n - d)) & 1
            if v < self.min_so_far:
                self.min_so_far = v
            crossing = v - self._slope * self._log_depth[d]
            if crossing < self.barrier_min:
                self.barrier_min = crossing

        self._next_index = i + 1
        if self._next_index == self._count:
            self.finished = True
        return Leaf(i, i / self._count, self.partial_v[n], self.partial_x[n])

    def barrier_crossed(self, x: float) -> bool:
        return bool(self.barrier_min <= -x)

    def barrier_flags(self, x_grid: Iterable[float]) -> Dict[float, bool]:
        return {float(x): self.barrier_crossed(x) for x in x_grid}

    def drain(self) -> "StreamCursor":
        """Consume the remaining leaves so the trackers are final."""
        for _ in self:
            pass
        return self


def simulate(
    params: Optional[ModelParams],
    n: int,
    rng: RandomSource,
    mode: SimulationMode = SimulationMode.BREADTH,
    *,
    epsilon0: Optional[float] = None,
    max_depth: Optional[int] = None,
    buffer_size: Optional[int] = None,
    stop_when: Optional[Callable[[LevelState], bool]] = None,
) -> Union[LevelState, StreamCursor]:
    """
    Simulate ``n`` generations.

    The node law does not depend on ``params``; it is accepted so call
    sites read like the model. ``stop_when`` (breadth only) ends the run
    early once it returns true for the current level.
    """
    n = _check_depth(n)
    if mode is SimulationMode.STREAM:
        return StreamCursor(n, rng, epsilon0=epsilon0, buffer_size=buffer_size)

    _check_capacity(n, max_depth)
    streams = _as_streams(rng)
    level = root_level(epsilon0)
    while level.depth < n:
        level = extend(level, streams, max_depth=max_depth)
        if stop_when is not None and stop_when(level):
            logger.debug("Stopped %r at depth %s of %s", streams, level.depth, n)
            break
    return level


def simulate_levels(
    params: Optional[ModelParams],
    n: int,
    rng: RandomSource,
    keep: Iterable[int],
    *,
    epsilon0: Optional[float] = None,
    max_depth: Optional[int] = None,
) -> Dict[int, LevelState]:
    """Snapshots of the requested depths from one breadth pass up to ``n``."""
    n = _check_depth(n)
    wanted = {int(d) for d in keep}
    bad = [d for d in wanted if d < 0 or d > n]
    if bad:
        raise DepthError(f"requested depths {sorted(bad)} outside [0, {n}]")
    _check_capacity(n, max_depth)

    streams = _as_streams(rng)
    level = root_level(epsilon0)
    snapshots: Dict[int, LevelState] = {}
    if 0 in wanted:
        snapshots[0] = level
    while level.depth < n:
        level = extend(level, streams, max_depth=max_depth)
        if level.depth in wanted:
            snapshots[level.depth] = level
    return snapshots


def subtree_masses(leaf_level: LevelState, ancestor: LevelState, params: ModelParams) -> np.ndarray:
    """
    M(u) for every u of ``ancestor``'s generation:
    sum over leaves z below u of exp(-gamma [V(z) - V(u)] + i beta sqrt(2 ln 2) [X(z) - X(u)]).
    ``ancestor`` must come from the same tree as ``leaf_level``.
    """
    l = ancestor.depth
    if l > leaf_level.depth:
        raise DepthError(f"ancestor depth {l} is below leaf depth {leaf_level.depth}")
    block = 2 ** (leaf_level.depth - l)
    relative_v = leaf_level.v - np.repeat(ancestor.v, block)
    relative_x = leaf_level.x - np.repeat(ancestor.x, block)
    weights = leaf_weight(params, relative_v, relative_x)
    return weights.reshape(ancestor.size, block).sum(axis=1)


def leaf_weights(level: LevelState, params: ModelParams) -> np.ndarray:
    return leaf_weight(params, level.v, level.x)


def dump_level(
    level: LevelState,
    path: Union[str, Path],
    params: ModelParams,
    seed: Optional[int] = None,
) -> Path:
    """Write a level as a fixed header followed by little-endian float64 v then x."""
    path = Path(path)
    header = _DUMP_HEADER.pack(
        DUMP_MAGIC,
        DUMP_VERSION,
        level.depth,
        params.gamma,
        params.beta,
        level.epsilon0,
        _UNKNOWN_SEED if seed is None else seed,
    )
    with path.open("wb") as handle:
        handle.write(header)
        handle.write(level.v.astype("<f8").tobytes())
        handle.write(level.x.astype("<f8").tobytes())
    logger.debug("Dumped depth-%s level to %s", level.depth, path)
    return path


class LevelDump(NamedTuple):
    level: LevelState
    params: ModelParams
    seed: Optional[int]


def load_level(path: Union[str, Path]) -> LevelDump:
    """Read a file written by :func:`dump_level`; trackers are recomputed from the leaves only."""
    raw = Path(path).read_bytes()
    if len(raw) < _DUMP_HEADER.size:
        raise ValueError(f"{path}: truncated level dump")
    magic, version, depth, gamma, beta, epsilon0, seed = _DUMP_HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC or version != DUMP_VERSION:
        raise ValueError(f"{path}: not a level dump (magic={magic!r}, version={version})")

    size = 2 ** depth
    body = np.frombuffer(raw, dtype="<f8", offset=_DUMP_HEADER.size)
    if body.shape[0] != 2 * size:
        raise ValueError(f"{path}: expected {2 * size} values, found {body.shape[0]}")
    v = body[:size].astype(np.float64)
    x = body[size:].astype(np.float64)
    leaf_min = float(v.min())
    barrier = leaf_min - barrier_slope(epsilon0) * math.log(depth) if depth else math.inf
    level = LevelState(
        depth=depth,
        v=v,
        x=x,
        min_so_far=min(0.0, leaf_min),
        barrier_min=barrier,
        epsilon0=epsilon0,
    )
    return LevelDump(level, ModelParams(gamma, beta), None if seed == _UNKNOWN_SEED else seed)
