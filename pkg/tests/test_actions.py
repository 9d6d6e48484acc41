import numpy as np
import pytest

from truss_agents.actions import (
    S_DEFAULT,
    AddMember,
    AddNode,
    DecreaseThickness,
    DeleteMember,
    DeleteNode,
    IncreaseThickness,
    InapplicableAction,
    action_from_dict,
    action_to_dict,
    apply,
    apply_unchecked,
    is_applicable,
)
from truss_agents.model import (
    Member,
    Point2D,
    TrussDesign,
    constrained_scenario,
    empty_design,
    unconstrained_scenario,
    validate_design,
)


def small_design(sc):
    d = empty_design(sc)
    d = apply(AddNode(Point2D(2.0, 2.0)), d, sc)
    d = apply(AddMember("S0", "N1"), d, sc)
    d = apply(AddMember("L0", "N1"), d, sc)
    return d


def test_add_node_and_member_ids():
    sc = unconstrained_scenario()
    d = small_design(sc)
    assert d.node("N1").pos == Point2D(2.0, 2.0)
    assert [m.id for m in d.members] == ["M1", "M2"]
    assert all(m.size_index == S_DEFAULT for m in d.members)


def test_thickness_changes_only_target():
    sc = unconstrained_scenario()
    d = small_design(sc)
    up = apply(IncreaseThickness("M1"), d, sc)
    assert up.member("M1").size_index == S_DEFAULT + 1
    assert up.member("M2") == d.member("M2")
    assert apply(DecreaseThickness("M1"), up, sc) == d


def test_thickness_limits():
    sc = unconstrained_scenario()
    d = TrussDesign(sc.fixed_nodes, (Member("M1", "S0", "L0", 10), Member("M2", "L0", "L1", 1)))
    assert not is_applicable(IncreaseThickness("M1"), d, sc)
    assert not is_applicable(DecreaseThickness("M2"), d, sc)
    with pytest.raises(InapplicableAction, match="maximum"):
        apply(IncreaseThickness("M1"), d, sc)


def test_delete_node_cascades():
    sc = unconstrained_scenario()
    d = apply(DeleteNode("N1"), small_design(sc), sc)
    assert not d.has_node("N1") and d.members == ()
    assert not is_applicable(DeleteNode("S0"), d, sc)


def test_obstacle_rules():
    sc = constrained_scenario()
    d = empty_design(sc)
    assert not is_applicable(AddNode(Point2D(5.0, 3.0)), d, sc)
    d = apply(AddNode(Point2D(5.0, 2.0)), d, sc)
    d = apply(AddNode(Point2D(5.0, 4.99)), d, sc) if is_applicable(AddNode(Point2D(5.0, 4.99)), d, sc) else d
    top = apply(AddNode(Point2D(9.0, 4.5)), d, sc)
    assert not is_applicable(AddMember("S0", top.nodes[-1].id), top, sc)


def test_action_dict_round_trip():
    for a in (
        AddNode(Point2D(1.5, 2.25)),
        AddMember("N1", "S0"),
        DeleteNode("N3"),
        DeleteMember("M2"),
        IncreaseThickness("M1"),
        DecreaseThickness("M4"),
    ):
        assert action_from_dict(action_to_dict(a)) == a
    with pytest.raises(ValueError):
        action_from_dict({"type": "Teleport", "payload": {}})
    with pytest.raises(ValueError):
        action_from_dict({"type": "AddNode", "payload": {"x": 1.0}})


def random_action(rng, design, sc):
    node_ids = [n.id for n in design.nodes] + ["N99"]
    member_ids = [m.id for m in design.members] + ["M99"]
    k = rng.integers(6)
    if k == 0:
        b = sc.bounds
        x = rng.uniform(b.min.x - 0.5, b.max.x + 0.5)
        y = rng.uniform(b.min.y - 0.5, b.max.y + 0.5)
        if rng.random() < 0.2 and design.nodes:
            # near an existing node to exercise the spacing rule
            n = design.nodes[rng.integers(len(design.nodes))]
            x, y = n.pos.x + rng.uniform(-0.15, 0.15), n.pos.y + rng.uniform(-0.15, 0.15)
        return AddNode(Point2D(round(float(x), 3), round(float(y), 3)))
    if k == 1:
        return AddMember(str(rng.choice(node_ids)), str(rng.choice(node_ids)))
    if k == 2:
        return DeleteNode(str(rng.choice(node_ids)))
    cls = (DeleteMember, IncreaseThickness, DecreaseThickness)[k - 3]
    return cls(str(rng.choice(member_ids)))


def test_applicability_matches_validation_on_10k_pairs():
    rng = np.random.default_rng(2024)
    checked = 0
    for sc in (unconstrained_scenario(), constrained_scenario()):
        design = empty_design(sc)
        while checked < (5000 if sc.obstacles == () else 10_000):
            action = random_action(rng, design, sc)
            try:
                after = apply_unchecked(action, design)
                valid = validate_design(after, sc) == []
            except InapplicableAction:
                valid, after = False, None
            assert is_applicable(action, design, sc) == valid, action
            checked += 1
            if valid and rng.random() < 0.5:
                design = after
            if len(design.nodes) > 14:
                design = empty_design(sc)
    assert checked == 10_000


def test_filter_keeps_only_applicable_subset():
    from truss_agents.actions import CandidateAction, filter_candidates

    rng = np.random.default_rng(5)
    sc = constrained_scenario()
    design = empty_design(sc)
    for _ in range(200):
        cands = [CandidateAction(random_action(rng, design, sc)) for _ in range(8)]
        kept = filter_candidates(cands, design, sc)
        assert all(c in cands for c in kept)
        assert all(is_applicable(c.action, design, sc) for c in kept)
        assert [c for c in cands if is_applicable(c.action, design, sc)] == kept
        if kept:
            design = apply(kept[0].action, design, sc)
        if len(design.nodes) > 12:
            design = empty_design(sc)


def test_delete_node_never_leaves_dangling_members():
    sc = unconstrained_scenario()
    rng = np.random.default_rng(6)
    for _ in range(50):
        d = empty_design(sc)
        for k in range(4):
            d = apply(AddNode(Point2D(1.0 + 2.0 * k, 1.0 + rng.random() * 3)), d, sc)
        ids = [n.id for n in d.nodes]
        for _ in range(8):
            a, b = rng.choice(len(ids), size=2, replace=False)
            act = AddMember(ids[a], ids[b])
            if is_applicable(act, d, sc):
                d = apply(act, d, sc)
        victim = f"N{rng.integers(1, 5)}"
        after = apply(DeleteNode(victim), d, sc)
        assert validate_design(after, sc) == []
        assert all(victim not in (m.node_a, m.node_b) for m in after.members)
