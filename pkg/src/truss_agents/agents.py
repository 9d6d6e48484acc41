"""Action selection for the four agent variants and the per-step pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .actions import (
    AddMember,
    AddNode,
    CandidateAction,
    DecreaseThickness,
    DeleteMember,
    DeleteNode,
    IncreaseThickness,
    action_to_dict,
    apply,
    apply_unchecked,
    filter_candidates,
)
from .fea import EvaluationResult, evaluate, rank_key
from .model import Point2D, Scenario, TrussDesign, next_id
from .visual import Heatmap, infer_candidates, render, ssim, synth_heatmap, target_image

VANILLA, TEMPORAL, GOAL, COMBINATION = "vanilla", "temporal", "goal", "combination"
VARIANTS = (VANILLA, TEMPORAL, GOAL, COMBINATION)

SEQUENTIAL_ADD_MEMBER = "SequentialAddMember"
REPEATED_THICKNESS = "RepeatedThickness"
NODE_THEN_CONNECT = "NodeThenConnect"
SPATIAL_MIRROR = "SpatialMirror"
NO_HEURISTIC = "None"
HEURISTIC_LABELS = (SEQUENTIAL_ADD_MEMBER, REPEATED_THICKNESS, NODE_THEN_CONNECT, SPATIAL_MIRROR, NO_HEURISTIC)

MIRROR_TOL = 0.3  # m


@dataclass(frozen=True)
class SelectionWeights:
    heuristic: float = 0.30
    greedy: float = 0.60
    random: float = 0.10

    def __post_init__(self):
        w = (self.heuristic, self.greedy, self.random)
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError(f"selection weights must be non-negative and sum to 1, got {w}")

    def as_list(self) -> list[float]:
        return [self.heuristic, self.greedy, self.random]


@dataclass(frozen=True)
class AgentConfig:
    variant: str = COMBINATION
    weights: SelectionWeights = field(default_factory=SelectionWeights)
    burst_length: int = 5
    lookahead_depth: int = 1
    seed: int = 0
    n_init: int = 4

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.burst_length < 1:
            raise ValueError("burst_length must be positive")
        if self.lookahead_depth != 1:
            raise ValueError("only one-step lookahead is supported")
        if self.n_init < 0:
            raise ValueError("n_init must be non-negative")


@dataclass(frozen=True)
class HistoryEntry:
    action: object
    position: Point2D | None
    created_node: str | None = None


@dataclass(frozen=True)
class HeuristicState:
    active: str = NO_HEURISTIC
    remaining_burst: int = 0
    anchor: Point2D | None = None


@dataclass(frozen=True)
class AgentState:
    heuristic: HeuristicState = HeuristicState()
    history: tuple[HistoryEntry, ...] = ()
    finished: bool = False


# --- heuristics ----------------------------------------------------------------


def _midpoint(design: TrussDesign, a: str, b: str) -> Point2D | None:
    nodes = design.node_map()
    if a not in nodes or b not in nodes:
        return nodes[a].pos if a in nodes else (nodes[b].pos if b in nodes else None)
    pa, pb = nodes[a].pos, nodes[b].pos
    return Point2D(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y))


def action_position(action, design: TrussDesign) -> Point2D | None:
    """Spatial payload of an action, resolved against ``design``."""
    if isinstance(action, AddNode):
        return action.pos
    if isinstance(action, AddMember):
        return _midpoint(design, action.node_a, action.node_b)
    if isinstance(action, DeleteNode):
        return design.node(action.node_id).pos if design.has_node(action.node_id) else None
    if design.has_member(action.member_id):
        m = design.member(action.member_id)
        return _midpoint(design, m.node_a, m.node_b)
    return None


def history_entry(action, design: TrussDesign) -> HistoryEntry:
    created = next_id((n.id for n in design.nodes), "N") if isinstance(action, AddNode) else None
    return HistoryEntry(action, action_position(action, design), created)


def classify_heuristic(
    candidate: CandidateAction,
    history: tuple[HistoryEntry, ...] | list[HistoryEntry],
    design: TrussDesign,
    scenario: Scenario,
) -> str:
    if not history:
        return NO_HEURISTIC
    act = candidate.action
    prev = history[-1]
    if isinstance(act, AddMember) and isinstance(prev.action, AddMember):
        if {act.node_a, act.node_b} & {prev.action.node_a, prev.action.node_b}:
            return SEQUENTIAL_ADD_MEMBER
    thickness = (IncreaseThickness, DecreaseThickness)
    if isinstance(act, thickness) and type(prev.action) is type(act):
        return REPEATED_THICKNESS
    if isinstance(act, AddMember):
        recent = {h.created_node for h in history[-2:] if h.created_node is not None}
        if {act.node_a, act.node_b} & recent:
            return NODE_THEN_CONNECT
    pos = action_position(act, design)
    if pos is not None and prev.position is not None:
        mirrored_x = 2.0 * scenario.midline_x - prev.position.x
        if np.hypot(pos.x - mirrored_x, pos.y - prev.position.y) <= MIRROR_TOL:
            return SPATIAL_MIRROR
    return NO_HEURISTIC


# --- selectors -----------------------------------------------------------------


def vanilla_scores(candidates, design, heatmap: Heatmap, scenario) -> list[float]:
    current = render(design, scenario, heatmap.shape[0])
    target = target_image(current, heatmap)
    return [
        ssim(render(apply_unchecked(c.action, design), scenario, heatmap.shape[0]), target)
        for c in candidates
    ]


def _argmax_first(values) -> int:
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


def select_vanilla(candidates, design, heatmap, scenario) -> CandidateAction | None:
    if not candidates:
        return None
    return candidates[_argmax_first(vanilla_scores(candidates, design, heatmap, scenario))]


def select_temporal(
    candidates, design, heatmap, scenario, state: HeuristicState, history=(), burst_length: int = 5
) -> tuple[CandidateAction | None, HeuristicState]:
    if not candidates:
        return None, state
    if state.remaining_burst > 0:
        matching = [
            c for c in candidates if classify_heuristic(c, history, design, scenario) == state.active
        ]
        if matching:
            choice = select_vanilla(matching, design, heatmap, scenario)
            label = state.active
            return (
                replace(choice, heuristic_label=label),
                HeuristicState(label, state.remaining_burst - 1, action_position(choice.action, design)),
            )
    choice = select_vanilla(candidates, design, heatmap, scenario)
    label = classify_heuristic(choice, history, design, scenario)
    return (
        replace(choice, heuristic_label=label),
        HeuristicState(label, burst_length - 1, action_position(choice.action, design)),
    )


def lookahead_evaluations(candidates, design, scenario) -> list[EvaluationResult]:
    return [evaluate(apply_unchecked(c.action, design), scenario) for c in candidates]


def select_greedy(candidates, design, scenario) -> CandidateAction | None:
    if not candidates:
        return None
    keys = [rank_key(e) for e in lookahead_evaluations(candidates, design, scenario)]
    return candidates[_argmax_first(keys)]


def select_goal(candidates, design, scenario, heatmap) -> CandidateAction | None:
    if not candidates:
        return None
    if not evaluate(design, scenario).feasible:
        return select_vanilla(candidates, design, heatmap, scenario)
    return select_greedy(candidates, design, scenario)


def draw_mode(weights: SelectionWeights, rng: np.random.Generator) -> str:
    u = rng.random()
    if u < weights.heuristic:
        return "heuristic"
    if u < weights.heuristic + weights.greedy:
        return "greedy"
    return "random"


def select_combination(
    candidates,
    design,
    scenario,
    heatmap,
    state: HeuristicState,
    weights: SelectionWeights,
    rng_state,
    history=(),
    burst_length: int = 5,
) -> tuple[CandidateAction | None, HeuristicState, str]:
    """Returns the choice, the updated burst state and the mode used."""
    if not candidates:
        return None, state, "none"
    if not evaluate(design, scenario).feasible:
        choice, st = select_temporal(candidates, design, heatmap, scenario, state, history, burst_length)
        return choice, st, TEMPORAL
    rng = np.random.default_rng(rng_state)
    mode = draw_mode(weights, rng)
    if mode == "heuristic":
        choice, st = select_temporal(candidates, design, heatmap, scenario, state, history, burst_length)
        return choice, st, "heuristic"
    if mode == "greedy":
        return select_greedy(candidates, design, scenario), state, "greedy"
    return candidates[int(rng.integers(len(candidates)))], state, "random"


# --- pipeline ------------------------------------------------------------------


def step_seed(agent_seed: int, iteration: int, stream: int) -> list[int]:
    return [agent_seed & 0xFFFFFFFFFFFFFFFF, iteration, stream]


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    action: dict | None
    fos: float
    mass: float
    swr: float | None
    feasible: bool
    solvable: bool
    selector_mode: str
    n_candidates: int

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "action": self.action,
            "fos": self.fos,
            "mass": self.mass,
            "swr": self.swr,
            "feasible": self.feasible,
            "solvable": self.solvable,
            "selector_mode": self.selector_mode,
            "n_candidates": self.n_candidates,
        }


Suggester = Callable[..., Heatmap]


def propose(design, scenario, iteration: int, agent_seed: int, suggester: Suggester = synth_heatmap):
    """Heatmap and validity-filtered candidates for the current state."""
    ev = evaluate(design, scenario)
    heatmap = suggester(design, scenario, ev, step_seed(agent_seed, iteration, 0))
    candidates = filter_candidates(infer_candidates(heatmap, design, scenario), design, scenario)
    return heatmap, candidates


def agent_step(
    design: TrussDesign,
    scenario: Scenario,
    config: AgentConfig,
    state: AgentState,
    iteration: int,
    agent_seed: int | None = None,
    suggester: Suggester = synth_heatmap,
) -> tuple[TrussDesign, StepRecord, AgentState]:
    """One eval -> heatmap -> inference -> selection -> apply pass.

    When no candidate survives, the returned state is ``finished`` and the
    design is unchanged.
    """
    seed = config.seed if agent_seed is None else agent_seed
    heatmap, candidates = propose(design, scenario, iteration, seed, suggester)
    if not candidates:
        ev = evaluate(design, scenario)
        rec = StepRecord(iteration, None, ev.fos, ev.mass, ev.swr, ev.feasible, ev.solvable, "none", 0)
        return design, rec, replace(state, finished=True)

    heur = state.heuristic
    variant = config.variant
    if variant == VANILLA:
        choice, mode = select_vanilla(candidates, design, heatmap, scenario), VANILLA
    elif variant == TEMPORAL:
        choice, heur = select_temporal(
            candidates, design, heatmap, scenario, heur, state.history, config.burst_length
        )
        mode = TEMPORAL
    elif variant == GOAL:
        feasible = evaluate(design, scenario).feasible
        choice = select_goal(candidates, design, scenario, heatmap)
        mode = "greedy" if feasible else VANILLA
    else:
        choice, heur, mode = select_combination(
            candidates,
            design,
            scenario,
            heatmap,
            heur,
            config.weights,
            step_seed(seed, iteration, 1),
            state.history,
            config.burst_length,
        )

    new_design = apply(choice.action, design, scenario)
    ev = evaluate(new_design, scenario)
    rec = StepRecord(
        iteration,
        action_to_dict(choice.action),
        ev.fos,
        ev.mass,
        ev.swr,
        ev.feasible,
        ev.solvable,
        mode,
        len(candidates),
    )
    history = (state.history + (history_entry(choice.action, design),))[-8:]
    return new_design, rec, AgentState(heur, history, False)
