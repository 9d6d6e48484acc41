import dataclasses
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import nodal_residuals, random_triangulated
from oracles import determinate_fixtures, fixture_scenario, method_of_joints
from truss_agents.fea import (
    FOS_SENTINEL,
    EvaluationResult,
    Unsolvable,
    analyze,
    assemble_and_solve,
    evaluate,
    factor_of_safety,
    member_capacity,
    member_forces,
    objective_rank,
    rank_key,
)
from truss_agents.model import (
    FREE,
    LOAD,
    SUPPORT,
    Material,
    Member,
    Node,
    Point2D,
    SizeTable,
    TrussDesign,
    empty_design,
    total_mass,
    unconstrained_scenario,
)

FIXTURES = determinate_fixtures()


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_forces_match_method_of_joints(name):
    scenario, design = FIXTURES[name]
    expected = method_of_joints(design)
    solved = {f.member_id: f.axial_force for f in analyze(design, scenario).forces}
    for mid, force in expected.items():
        assert solved[mid] == pytest.approx(force, rel=1e-6)


def test_two_bar_hand_statics():
    scenario, design = FIXTURES["two_bar"]
    forces = analyze(design, scenario).forces
    # each 45 degree leg carries half the load along its axis
    for f in forces:
        assert f.axial_force == pytest.approx(-1000.0 / math.sqrt(2.0), rel=1e-9)


def test_capacity_yield_and_buckling():
    mat = Material()
    table = SizeTable.solid_circular()
    m = Member("M1", "a", "b", 3)
    r = 0.015
    area, inertia = math.pi * r**2, math.pi * r**4 / 4
    assert member_capacity(m, 2.0, mat, table, compression=False) == pytest.approx(250e6 * area)
    euler = math.pi**2 * 200e9 * inertia / 4.0
    assert member_capacity(m, 2.0, mat, table, compression=True) == pytest.approx(min(250e6 * area, euler))
    # very short struts are governed by yield
    assert member_capacity(m, 0.05, mat, table) == pytest.approx(250e6 * area)


def test_fos_examples():
    scenario, design = FIXTURES["two_bar"]
    forces = analyze(design, scenario).forces
    expected = min(f.capacity / abs(f.axial_force) for f in forces)
    assert factor_of_safety(design, scenario) == pytest.approx(expected)
    res = evaluate(design, scenario)
    assert res.solvable and res.swr == pytest.approx(res.fos / res.mass)


def test_empty_and_floating_designs_are_unsolvable():
    sc = unconstrained_scenario()
    res = evaluate(empty_design(sc), sc)
    assert (res.solvable, res.fos, res.feasible) == (False, 0.0, False)

    scenario, design = FIXTURES["two_bar"]
    lonely = Node("N9", Point2D(0.5, 0.2), FREE)
    floating = TrussDesign(design.nodes + (lonely,), design.members)
    assert not evaluate(floating, scenario).solvable
    with pytest.raises(Unsolvable):
        assemble_and_solve(floating, scenario)


def test_collinear_mechanism_unsolvable():
    s0 = Node("S0", Point2D(0.0, 0.0), SUPPORT)
    s1 = Node("S1", Point2D(2.0, 0.0), SUPPORT)
    mid = Node("L0", Point2D(1.0, 0.0), LOAD, (0.0, -100.0))
    sc = fixture_scenario([s0, s1, mid], 2, 1)
    d = TrussDesign((s0, s1, mid), (Member("M1", "S0", "L0"), Member("M2", "L0", "S1")))
    assert not evaluate(d, sc).solvable


def test_zero_demand_gives_sentinel():
    s0 = Node("S0", Point2D(0.0, 0.0), SUPPORT)
    s1 = Node("S1", Point2D(2.0, 0.0), SUPPORT)
    n = Node("N1", Point2D(1.0, 1.0), FREE)
    sc = fixture_scenario([s0, s1], 2, 1)
    d = TrussDesign((s0, s1, n), (Member("M1", "S0", "N1"), Member("M2", "S1", "N1")))
    res = evaluate(d, sc)
    assert res.solvable and res.fos == FOS_SENTINEL and res.feasible


def test_rank_key_orders_feasible_first():
    feas_light = EvaluationResult(2.0, 100.0, 0.02, True, True)
    feas_heavy = EvaluationResult(2.0, 200.0, 0.01, True, True)
    weak = EvaluationResult(0.99, 50.0, 0.0198, False, True)
    weaker = EvaluationResult(0.3, 50.0, 0.006, False, True)
    assert objective_rank(feas_heavy, weak) == 1
    assert objective_rank(feas_light, feas_heavy) == 1
    assert objective_rank(weak, weaker) == 1
    assert objective_rank(weak, weak) == 0
    ordered = sorted([weaker, feas_heavy, weak, feas_light], key=rank_key)
    assert ordered == [weaker, weak, feas_heavy, feas_light]


def test_random_designs_in_equilibrium():
    rng = np.random.default_rng(7)
    for _ in range(50):
        design, sc = random_triangulated(rng)
        assert evaluate(design, sc).solvable
        assert nodal_residuals(design, sc) < 1e-6


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), factor=st.floats(0.1, 10.0))
def test_load_scaling(seed, factor):
    design, sc = random_triangulated(np.random.default_rng(seed))
    scaled_nodes = tuple(
        Node(n.id, n.pos, n.kind, (n.load[0] * factor, n.load[1] * factor)) for n in sc.fixed_nodes
    )
    sc2 = dataclasses.replace(sc, fixed_nodes=scaled_nodes)
    d2 = TrussDesign(scaled_nodes + design.nodes[len(scaled_nodes) :], design.members)
    f1 = {f.member_id: f.axial_force for f in analyze(design, sc).forces}
    f2 = {f.member_id: f.axial_force for f in analyze(d2, sc2).forces}
    for k in f1:
        assert f2[k] == pytest.approx(f1[k] * factor, rel=1e-9, abs=1e-9)
    fos1, fos2 = factor_of_safety(design, sc), factor_of_safety(d2, sc2)
    if fos1 < FOS_SENTINEL:
        assert fos2 == pytest.approx(fos1 / factor, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_mirror_symmetry(seed):
    sc = unconstrained_scenario()
    design, _ = random_triangulated(np.random.default_rng(seed), sc)
    swap = {"S0": "S1", "S1": "S0", "L0": "L2", "L2": "L0"}
    fixed = {n.id: n for n in sc.fixed_nodes}
    mirrored_nodes = []
    for n in design.nodes:
        if n.id in fixed:
            mirrored_nodes.append(n)
        else:
            mirrored_nodes.append(Node(n.id, Point2D(10.0 - n.pos.x, n.pos.y), n.kind))
    members = []
    for m in design.members:
        members.append(Member(m.id, swap.get(m.node_a, m.node_a), swap.get(m.node_b, m.node_b), m.size_index))
    mirrored = TrussDesign(tuple(mirrored_nodes), tuple(members))
    assert factor_of_safety(mirrored, sc) == pytest.approx(factor_of_safety(design, sc), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), pick=st.integers(0, 1000))
def test_mass_strictly_monotone_in_size(seed, pick):
    design, sc = random_triangulated(np.random.default_rng(seed))
    members = list(design.members)
    i = pick % len(members)
    m = members[i]
    if m.size_index >= sc.size_table.s_max:
        return
    members[i] = Member(m.id, m.node_a, m.node_b, m.size_index + 1)
    assert total_mass(TrussDesign(design.nodes, tuple(members)), sc) > total_mass(design, sc)


def test_fixture_suite_is_fast():
    t0 = time.perf_counter()
    for scenario, design in FIXTURES.values():
        analyze.cache_clear()
        member_forces(design, assemble_and_solve(design, scenario), scenario)
    assert time.perf_counter() - t0 < 1.0
