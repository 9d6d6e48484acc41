import numpy as np
import pytest

from builders import random_triangulated
from truss_agents.actions import (
    AddMember,
    AddNode,
    CandidateAction,
    DeleteMember,
    IncreaseThickness,
    apply_unchecked,
)
from truss_agents.agents import (
    COMBINATION,
    GOAL,
    NODE_THEN_CONNECT,
    NO_HEURISTIC,
    REPEATED_THICKNESS,
    SEQUENTIAL_ADD_MEMBER,
    SPATIAL_MIRROR,
    TEMPORAL,
    VANILLA,
    AgentConfig,
    AgentState,
    HeuristicState,
    SelectionWeights,
    agent_step,
    classify_heuristic,
    draw_mode,
    history_entry,
    propose,
    select_combination,
    select_goal,
    select_temporal,
    select_vanilla,
    vanilla_scores,
)
from truss_agents.fea import evaluate, rank_key
from truss_agents.model import Point2D, empty_design, unconstrained_scenario
from truss_agents.team import initial_state

SC = unconstrained_scenario()


def cand(action):
    return CandidateAction(action)


def hist(*pairs):
    design = empty_design(SC)
    out = []
    for action in pairs:
        out.append(history_entry(action, design))
        design = apply_unchecked(action, design)
    return tuple(out), design


# --- heuristic labels ------------------------------------------------------------


def test_no_history_means_no_heuristic():
    assert classify_heuristic(cand(AddMember("S0", "L0")), (), empty_design(SC), SC) == NO_HEURISTIC


def test_sequential_add_member():
    h, d = hist(AddMember("S0", "L0"))
    assert classify_heuristic(cand(AddMember("L0", "L1")), h, d, SC) == SEQUENTIAL_ADD_MEMBER
    assert classify_heuristic(cand(AddMember("L1", "L2")), h, d, SC) != SEQUENTIAL_ADD_MEMBER


def test_repeated_thickness():
    h, d = hist(AddMember("S0", "L0"), AddMember("L1", "L2"), IncreaseThickness("M1"))
    assert classify_heuristic(cand(IncreaseThickness("M2")), h, d, SC) == REPEATED_THICKNESS


def test_node_then_connect():
    h, d = hist(AddNode(Point2D(4.0, 2.0)), AddMember("S0", "L2"))
    assert h[0].created_node == "N1"
    assert classify_heuristic(cand(AddMember("N1", "S1")), h, d, SC) == NODE_THEN_CONNECT


def test_spatial_mirror():
    h, d = hist(AddNode(Point2D(2.0, 2.0)))
    assert classify_heuristic(cand(AddNode(Point2D(8.1, 2.1))), h, d, SC) == SPATIAL_MIRROR
    assert classify_heuristic(cand(AddNode(Point2D(7.0, 2.0))), h, d, SC) == NO_HEURISTIC


# --- selectors ----------------------------------------------------------------


def states(count, seed=5):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        out.append(random_triangulated(rng, SC)[0])
    return out


def test_select_goal_is_brute_force_argmax_on_feasible_states():
    checked = 0
    for d in states(80):
        if not evaluate(d, SC).feasible:
            continue
        heat, cands = propose(d, SC, 1, 99)
        if not cands:
            continue
        keys = [rank_key(evaluate(apply_unchecked(c.action, d), SC)) for c in cands]
        best = max(keys)
        first = next(i for i, k in enumerate(keys) if k == best)
        assert select_goal(cands, d, SC, heat) is cands[first]
        checked += 1
    assert checked >= 5


def test_goal_falls_back_to_vanilla_when_infeasible():
    d = initial_state(SC, [3, 0xD1])
    heat, cands = propose(d, SC, 1, 3)
    assert cands
    assert select_goal(cands, d, SC, heat) is select_vanilla(cands, d, heat, SC)


def test_vanilla_picks_first_of_tied_scores():
    d = initial_state(SC, [4, 0xD1])
    heat, cands = propose(d, SC, 1, 4)
    scores = vanilla_scores(cands, d, heat, SC)
    assert select_vanilla(cands, d, heat, SC) is cands[scores.index(max(scores))]


def test_combination_pure_greedy_equals_goal_on_feasible_states():
    w = SelectionWeights(0.0, 1.0, 0.0)
    checked = 0
    for d in states(60, seed=8):
        if not evaluate(d, SC).feasible:
            continue
        heat, cands = propose(d, SC, 2, 17)
        if not cands:
            continue
        got, _, mode = select_combination(cands, d, SC, heat, HeuristicState(), w, [1, 2, 1])
        assert mode == "greedy" and got is select_goal(cands, d, SC, heat)
        checked += 1
    assert checked >= 5


def test_combination_defers_to_temporal_when_infeasible():
    d = initial_state(SC, [6, 0xD1])
    heat, cands = propose(d, SC, 1, 6)
    st = HeuristicState()
    got, st2, mode = select_combination(cands, d, SC, heat, st, SelectionWeights(), [1, 1, 1])
    ref, ref_st = select_temporal(cands, d, heat, SC, st)
    assert (got, st2, mode) == (ref, ref_st, TEMPORAL)


def test_temporal_burst_restricts_to_active_heuristic():
    h, d = hist(AddMember("S0", "L0"))
    cands = [cand(AddMember("L1", "L2")), cand(AddMember("L0", "L1"))]
    heat, _ = propose(d, SC, 1, 0)
    st = HeuristicState(SEQUENTIAL_ADD_MEMBER, 3, None)
    choice, st2 = select_temporal(cands, d, heat, SC, st, h)
    assert choice.action == AddMember("L0", "L1")
    assert st2.active == SEQUENTIAL_ADD_MEMBER and st2.remaining_burst == 2


def test_empty_candidates():
    d = empty_design(SC)
    assert select_vanilla([], d, None, SC) is None
    assert select_goal([], d, SC, None) is None
    assert select_temporal([], d, None, SC, HeuristicState()) == (None, HeuristicState())


def test_weights_validation_and_mode_draw():
    with pytest.raises(ValueError):
        SelectionWeights(0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        SelectionWeights(-0.1, 1.0, 0.1)
    rng = np.random.default_rng(0)
    draws = [draw_mode(SelectionWeights(), rng) for _ in range(20_000)]
    assert draws.count("greedy") / len(draws) == pytest.approx(0.6, abs=0.02)
    assert draw_mode(SelectionWeights(0, 0, 1), rng) == "random"


def test_agent_config_validation():
    with pytest.raises(ValueError):
        AgentConfig(variant="oracle")
    with pytest.raises(ValueError):
        AgentConfig(burst_length=0)


@pytest.mark.parametrize("variant", [VANILLA, TEMPORAL, GOAL, COMBINATION])
def test_agent_step_is_deterministic(variant):
    d = initial_state(SC, [21, 0xD1])
    cfg = AgentConfig(variant=variant)
    a = agent_step(d, SC, cfg, AgentState(), 1, 21)
    b = agent_step(d, SC, cfg, AgentState(), 1, 21)
    assert a == b
    assert a[1].action is not None and a[1].n_candidates > 0


def test_agent_finishes_without_candidates():
    def silent(*_args, **_kw):
        from truss_agents.visual import Heatmap

        return Heatmap.zeros()

    d = empty_design(SC)
    new, rec, st = agent_step(d, SC, AgentConfig(), AgentState(), 1, 0, suggester=silent)
    assert new == d and st.finished and rec.action is None and rec.n_candidates == 0


def test_delete_candidates_keep_positions():
    h, d = hist(AddMember("S0", "L0"))
    e = history_entry(DeleteMember("M1"), d)
    assert e.position == Point2D(1.25, 0.0)


def test_goal_pick_dominates_every_candidate_and_ignores_scale():
    import dataclasses

    from builders import stiffened_until_feasible
    from truss_agents.fea import objective_rank
    from truss_agents.model import Material

    rng = np.random.default_rng(12)
    checked = 0
    while checked < 10:
        d = stiffened_until_feasible(random_triangulated(rng, SC)[0], SC)
        if d is None:
            continue
        heat, cands = propose(d, SC, 1, checked)
        pick = select_goal(cands, d, SC, heat)
        best = evaluate(apply_unchecked(pick.action, d), SC)
        for c in cands:
            assert objective_rank(best, evaluate(apply_unchecked(c.action, d), SC)) >= 0
        # a denser material scales every SWR by the same positive factor
        heavy = dataclasses.replace(SC, material=Material(density=SC.material.density * 3.7))
        assert select_goal(cands, d, heavy, heat) is pick
        checked += 1


def test_temporal_burst_choice_carries_active_label():
    hits = 0
    for s in range(40):
        d = initial_state(SC, [s, 0xD1])
        st_, hist_ = HeuristicState(), ()
        for it in range(1, 12):
            heat, cands = propose(d, SC, it, s)
            if not cands:
                break
            active = st_.active if st_.remaining_burst > 0 else None
            choice, st_ = select_temporal(cands, d, heat, SC, st_, hist_)
            if active is not None and any(
                classify_heuristic(c, hist_, d, SC) == active for c in cands
            ):
                assert choice.heuristic_label == active
                hits += 1
            hist_ = hist_ + (history_entry(choice.action, d),)
            d = apply_unchecked(choice.action, d)
    assert hits > 0
