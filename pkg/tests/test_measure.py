import math

import numpy as np
import pytest

from src.analyzers import geometry
from src.analyzers.measure import (
    DepthMismatchError,
    PartialSumProcess,
    StreamOrderError,
    block_oscillations,
    block_sup_bound,
    partial_sums,
    recombined_mass,
    smoothing_transform_ks,
    stream_totals,
    summary,
    sup_functional,
    sup_functional_stream,
    to_csv,
    total_variation,
    verify_cascade_recursion,
    verify_left_decomposition,
    verify_variation_cascade,
    windowed_sup_bruteforce,
)
from src.enums import DiameterMode, SimulationMode
from src.simulation.cascade import simulate, simulate_levels, subtree_masses
from src.simulation.seeding import TreeStreams
from src.simulation.weights import ModelParams, leaf_weight

BOUNDARY = ModelParams(0.7, 0.3)


@pytest.fixture
def tree():
    return simulate_levels(BOUNDARY, 10, TreeStreams(21), keep=range(11))


def test_partial_sums_depth_one():
    level = simulate(BOUNDARY, 1, TreeStreams(2))
    proc = partial_sums(level, BOUNDARY)
    w = leaf_weight(BOUNDARY, level.v, level.x)
    assert proc.sums[0] == 0
    assert proc.sums[1] == pytest.approx(w[0])
    assert proc.sums[2] == pytest.approx(w[0] + w[1])
    assert proc.positions.tolist() == [0.0, 0.5, 1.0]


def test_partial_sums_from_stream_matches_level():
    level = simulate(BOUNDARY, 8, TreeStreams(3))
    cursor = simulate(BOUNDARY, 8, TreeStreams(3), SimulationMode.STREAM)
    assert np.array_equal(partial_sums(cursor, BOUNDARY).sums, partial_sums(level, BOUNDARY).sums)


def test_partial_sums_accept_tuples():
    level = simulate(BOUNDARY, 3, TreeStreams(3))
    rows = [(k, level.v[k], level.x[k]) for k in range(8)]
    assert np.array_equal(partial_sums(rows, BOUNDARY).sums, partial_sums(level, BOUNDARY).sums)


def test_out_of_order_leaves_rejected():
    rows = [(0, 0.1, 0.0), (2, 0.2, 0.0), (1, 0.3, 0.0), (3, 0.4, 0.0)]
    with pytest.raises(StreamOrderError):
        partial_sums(rows, BOUNDARY)
    with pytest.raises(StreamOrderError):
        stream_totals(rows, BOUNDARY)


def test_non_power_of_two_rejected():
    rows = [(k, 0.0, 0.0) for k in range(3)]
    with pytest.raises(DepthMismatchError):
        partial_sums(rows, BOUNDARY)


def test_process_shape_is_checked():
    with pytest.raises(DepthMismatchError):
        PartialSumProcess(depth=2, sums=np.zeros(4, dtype=complex), params=BOUNDARY)


def test_unit_weights_count_leaves():
    flat = ModelParams(0.0, 0.0)
    proc = partial_sums(simulate(flat, 6, TreeStreams(1)), flat)
    assert proc.total == pytest.approx(64.0)
    assert np.allclose(proc.increments, 1.0)


def test_stream_totals_match_prefix_sums():
    level = simulate(BOUNDARY, 9, TreeStreams(13))
    totals = stream_totals(simulate(BOUNDARY, 9, TreeStreams(13), SimulationMode.STREAM), BOUNDARY)
    weights = leaf_weight(BOUNDARY, level.v, level.x)
    assert totals.leaves == 512
    assert abs(totals.total - weights.sum()) <= 1e-12 * np.abs(weights).sum()
    assert totals.modulus_sum == pytest.approx(np.abs(weights).sum(), rel=1e-12)


def test_cascade_recursion_holds(tree):
    proc = partial_sums(tree[10], BOUNDARY)
    masses = subtree_masses(tree[10], tree[1], BOUNDARY)
    assert verify_cascade_recursion(proc, masses, tree[1]) <= 1e-10
    assert abs(recombined_mass(masses, tree[1], BOUNDARY) - proc.total) <= 1e-10 * np.abs(proc.increments).sum()


def test_cascade_recursion_detects_foreign_masses(tree):
    proc = partial_sums(tree[10], BOUNDARY)
    assert verify_cascade_recursion(proc, [1.0, 1.0], tree[1]) > 1e-3


@pytest.mark.parametrize("u", [0, 1, 511, 512, 777, 1023])
def test_left_decomposition_holds(tree, u):
    proc = partial_sums(tree[10], BOUNDARY)
    error = verify_left_decomposition(tree, u, BOUNDARY, proc)
    assert error <= 1e-10 * np.abs(proc.increments).sum()


def test_left_decomposition_checks_inputs(tree):
    with pytest.raises(DepthMismatchError):
        verify_left_decomposition(tree, 1024, BOUNDARY)
    partial = {d: tree[d] for d in (0, 1, 10)}
    with pytest.raises(DepthMismatchError):
        verify_left_decomposition(partial, 3, BOUNDARY)


def test_sup_at_depth_zero_is_total_modulus(tree):
    proc = partial_sums(tree[6], BOUNDARY)
    sup = sup_functional(proc, 0)
    assert sup.p == 6
    assert sup.value == pytest.approx(abs(proc.total))


def test_sup_at_depth_one():
    level = simulate(BOUNDARY, 1, TreeStreams(4))
    w = leaf_weight(BOUNDARY, level.v, level.x)
    sup = sup_functional(partial_sums(level, BOUNDARY), 1)
    assert sup.value == pytest.approx(abs(w[0]) + abs(w[1]))


@pytest.mark.parametrize("n,p", [(6, 0), (6, 4)])
def test_sup_dominates_partial_masses(tree, n, p):
    proc = partial_sums(tree[n + p], BOUNDARY)
    sup = sup_functional(proc, n)
    on_grid = np.abs(proc.sums[:: 2 ** p]).max()
    assert sup.value >= on_grid * (1 - 1e-12)
    assert sup.value <= np.abs(proc.increments).sum() * (1 + 1e-12)


def test_stream_sup_matches_array_sup():
    level = simulate(BOUNDARY, 9, TreeStreams(8))
    array_sup = sup_functional(partial_sums(level, BOUNDARY), 6)
    cursor = simulate(BOUNDARY, 9, TreeStreams(8), SimulationMode.STREAM)
    stream_sup = sup_functional_stream(cursor, 6, 3, BOUNDARY)
    assert stream_sup.value == pytest.approx(array_sup.value, rel=1e-9)


def test_sup_rejects_bad_depth(tree):
    proc = partial_sums(tree[4], BOUNDARY)
    with pytest.raises(DepthMismatchError):
        sup_functional(proc, 5)


@pytest.mark.parametrize("l", [0, 3, 6, 10])
def test_oscillation_bracket_contains_bruteforce(tree, l):
    proc = partial_sums(tree[10], BOUNDARY)
    osc = block_oscillations(proc, l)
    exact = windowed_sup_bruteforce(proc, l)
    assert osc.lo <= exact * (1 + 1e-12)
    assert exact <= osc.hi * (1 + 1e-12)
    assert not osc.approximate
    assert osc.diameters.shape == (2 ** l,)


@pytest.mark.parametrize("n,l", [(n, l) for n in range(11) for l in range(n + 1)])
def test_oscillation_bracket_holds_on_every_level(tree, n, l):
    proc = partial_sums(tree[n], BOUNDARY)
    osc = block_oscillations(proc, l)
    exact = windowed_sup_bruteforce(proc, l)
    assert osc.lo <= exact * (1 + 1e-12)
    assert exact <= osc.hi * (1 + 1e-12)
    assert osc.hi == pytest.approx(3 * osc.lo)


@pytest.mark.parametrize("l", [2, 5, 8])
def test_bbox_mode_brackets_exact_diameters(tree, l):
    proc = partial_sums(tree[10], BOUNDARY)
    exact = block_oscillations(proc, l)
    boxed = block_oscillations(proc, l, DiameterMode.BBOX)
    assert boxed.approximate
    assert np.all(exact.diameters <= boxed.diameters * (1 + 1e-12))
    assert np.all(boxed.diameters <= math.sqrt(2.0) * exact.diameters * (1 + 1e-12))
    assert boxed.lo <= exact.lo * (1 + 1e-12)


@pytest.mark.parametrize("l", [0, 4, 9])
def test_block_sup_bound_dominates_bruteforce(tree, l):
    proc = partial_sums(tree[10], BOUNDARY)
    assert block_sup_bound(proc, l) >= windowed_sup_bruteforce(proc, l) * (1 - 1e-12)


def test_oscillation_rejects_bad_level(tree):
    proc = partial_sums(tree[4], BOUNDARY)
    with pytest.raises(DepthMismatchError):
        block_oscillations(proc, 5)


def test_total_variation_properties(tree):
    proc = partial_sums(tree[10], BOUNDARY)
    values = [total_variation(proc, l) for l in range(11)]
    assert values[0] == pytest.approx(abs(proc.total))
    assert values[-1] == pytest.approx(np.abs(proc.increments).sum())
    assert all(b >= a * (1 - 1e-12) for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("l", [0, 3, 9])
def test_variation_cascading_rule(tree, l):
    assert verify_variation_cascade(tree[10], tree[1], BOUNDARY, l) <= 1e-10


def test_variation_cascading_rule_checks_level(tree):
    with pytest.raises(DepthMismatchError):
        verify_variation_cascade(tree[10], tree[1], BOUNDARY, 10)


def test_hull_diameter_matches_pairwise_search():
    rng = np.random.default_rng(0)
    for size in (1, 2, 3, 5, 17, 200):
        xs = rng.normal(size=size)
        ys = rng.normal(size=size)
        assert geometry.hull_diameter(xs, ys) == pytest.approx(geometry._brute_diameter(xs, ys))


def test_hull_diameter_degenerate_sets():
    line_x = np.linspace(0.0, 3.0, 9)
    assert geometry.hull_diameter(line_x, 2 * line_x) == pytest.approx(math.hypot(3.0, 6.0))
    repeated = np.ones(6)
    assert geometry.hull_diameter(repeated, repeated) == 0.0
    square_x = np.array([0.0, 1.0, 1.0, 0.0, 0.5, 0.0])
    square_y = np.array([0.0, 0.0, 1.0, 1.0, 0.5, 0.0])
    assert geometry.hull_diameter(square_x, square_y) == pytest.approx(math.sqrt(2.0))


def test_smoothing_transform_ks_same_law():
    rng = np.random.default_rng(1)
    result = smoothing_transform_ks(rng.exponential(size=2000), rng.exponential(size=2000))
    assert result.passed
    shifted = smoothing_transform_ks(rng.exponential(size=2000), rng.exponential(size=2000) + 1.0)
    assert not shifted.passed


def test_to_csv_and_summary(tmp_path):
    level = simulate(BOUNDARY, 3, TreeStreams(5))
    proc = partial_sums(level, BOUNDARY)
    path = to_csv(proc, tmp_path / "path.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "k,t,re,im"
    assert len(lines) == 10

    report = summary(proc, levels=[0, 3])
    assert report["depth"] == 3
    assert set(report["oscillation"]) == {"0", "3"}
    assert report["total_variation"]["0"] == pytest.approx(abs(proc.total))
