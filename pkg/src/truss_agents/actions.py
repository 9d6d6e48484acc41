"""The six design actions, their applicability rules and application."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .model import (
    D_MIN,
    FREE,
    DesignError,
    Member,
    Node,
    Point2D,
    Scenario,
    TrussDesign,
    distance,
    next_id,
    segment_intersects_obstacle,
)

S_DEFAULT = 3  # size index given to newly added members


@dataclass(frozen=True)
class AddNode:
    pos: Point2D


@dataclass(frozen=True)
class AddMember:
    node_a: str
    node_b: str


@dataclass(frozen=True)
class DeleteNode:
    node_id: str


@dataclass(frozen=True)
class DeleteMember:
    member_id: str


@dataclass(frozen=True)
class IncreaseThickness:
    member_id: str


@dataclass(frozen=True)
class DecreaseThickness:
    member_id: str


Action = AddNode | AddMember | DeleteNode | DeleteMember | IncreaseThickness | DecreaseThickness

ACTION_TYPES = {
    cls.__name__: cls
    for cls in (AddNode, AddMember, DeleteNode, DeleteMember, IncreaseThickness, DecreaseThickness)
}


@dataclass(frozen=True)
class CandidateAction:
    action: Action
    source_blob: int | None = None
    heuristic_label: str | None = None


class InapplicableAction(ValueError):
    pass


def why_inapplicable(action: Action, design: TrussDesign, scenario: Scenario) -> str | None:
    """Name of the first violated rule, or None when the action may be applied."""
    if isinstance(action, AddNode):
        p = action.pos
        if not scenario.bounds.contains(p):
            return "node outside bounds"
        if any(o.rect.contains(p) for o in scenario.obstacles):
            return "node inside obstacle"
        if any(distance(p, n.pos) < D_MIN for n in design.nodes):
            return f"node closer than {D_MIN} m to an existing node"
        return None
    if isinstance(action, AddMember):
        if action.node_a == action.node_b:
            return "member endpoints coincide"
        nodes = design.node_map()
        a, b = nodes.get(action.node_a), nodes.get(action.node_b)
        if a is None or b is None:
            return "member endpoint does not exist"
        if design.find_member(action.node_a, action.node_b) is not None:
            return "duplicate member"
        if any(segment_intersects_obstacle(a.pos, b.pos, o) for o in scenario.obstacles):
            return "member crosses obstacle"
        return None
    if isinstance(action, DeleteNode):
        if not design.has_node(action.node_id):
            return "unknown node"
        if design.node(action.node_id).kind != FREE:
            return "load and support nodes cannot be deleted"
        return None
    if isinstance(action, (DeleteMember, IncreaseThickness, DecreaseThickness)):
        if not design.has_member(action.member_id):
            return "unknown member"
        size = design.member(action.member_id).size_index
        if isinstance(action, IncreaseThickness) and size >= scenario.size_table.s_max:
            return "member already at maximum size"
        if isinstance(action, DecreaseThickness) and size <= 1:
            return "member already at minimum size"
        return None
    return f"unknown action type {type(action).__name__}"


def is_applicable(action: Action, design: TrussDesign, scenario: Scenario) -> bool:
    return why_inapplicable(action, design, scenario) is None


def apply_unchecked(action: Action, design: TrussDesign) -> TrussDesign:
    """Raw mutation without validity checks (id lookups still must succeed)."""
    if isinstance(action, AddNode):
        node = Node(next_id((n.id for n in design.nodes), "N"), action.pos, FREE)
        return TrussDesign(design.nodes + (node,), design.members)
    if isinstance(action, AddMember):
        mid = next_id((m.id for m in design.members), "M")
        try:
            member = Member(mid, action.node_a, action.node_b, S_DEFAULT)
        except DesignError as exc:
            raise InapplicableAction(str(exc)) from exc
        return TrussDesign(design.nodes, design.members + (member,))
    if isinstance(action, DeleteNode):
        if not design.has_node(action.node_id):
            raise InapplicableAction(f"unknown node {action.node_id}")
        return TrussDesign(
            tuple(n for n in design.nodes if n.id != action.node_id),
            tuple(m for m in design.members if action.node_id not in (m.node_a, m.node_b)),
        )
    if isinstance(action, (DeleteMember, IncreaseThickness, DecreaseThickness)) and not design.has_member(
        action.member_id
    ):
        raise InapplicableAction(f"unknown member {action.member_id}")
    if isinstance(action, DeleteMember):
        return TrussDesign(design.nodes, tuple(m for m in design.members if m.id != action.member_id))
    if isinstance(action, (IncreaseThickness, DecreaseThickness)):
        step = 1 if isinstance(action, IncreaseThickness) else -1
        return TrussDesign(
            design.nodes,
            tuple(
                replace(m, size_index=m.size_index + step) if m.id == action.member_id else m
                for m in design.members
            ),
        )
    raise InapplicableAction(f"unknown action type {type(action).__name__}")


def apply(action: Action, design: TrussDesign, scenario: Scenario) -> TrussDesign:
    reason = why_inapplicable(action, design, scenario)
    if reason is not None:
        raise InapplicableAction(f"{type(action).__name__}: {reason}")
    return apply_unchecked(action, design)


def filter_candidates(
    candidates: list[CandidateAction], design: TrussDesign, scenario: Scenario
) -> list[CandidateAction]:
    return [c for c in candidates if is_applicable(c.action, design, scenario)]


def action_to_dict(action: Action) -> dict:
    kind = type(action).__name__
    if isinstance(action, AddNode):
        payload = {"x": action.pos.x, "y": action.pos.y}
    elif isinstance(action, AddMember):
        payload = {"a": action.node_a, "b": action.node_b}
    elif isinstance(action, DeleteNode):
        payload = {"node": action.node_id}
    else:
        payload = {"member": action.member_id}
    return {"type": kind, "payload": payload}


def action_from_dict(d: dict) -> Action:
    try:
        kind, p = d["type"], d["payload"]
        if kind == "AddNode":
            return AddNode(Point2D(float(p["x"]), float(p["y"])))
        if kind == "AddMember":
            return AddMember(str(p["a"]), str(p["b"]))
        if kind == "DeleteNode":
            return DeleteNode(str(p["node"]))
        if kind in ACTION_TYPES:
            return ACTION_TYPES[kind](str(p["member"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed action record {d!r}") from exc
    raise ValueError(f"unknown action type {d.get('type')!r}")
