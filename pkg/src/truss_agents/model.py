"""Truss designs, scenarios, mass, obstacle geometry and validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

FREE, LOAD, SUPPORT = "free", "load", "support"
NODE_KINDS = (FREE, LOAD, SUPPORT)

D_MIN = 0.1  # minimum spacing between nodes, m


class DesignError(ValueError):
    """Raised for structurally malformed designs or unknown ids."""


class ParseError(ValueError):
    """Malformed design or scenario text."""

    def __init__(self, message: str, field_name: str | None = None, line: int | None = None):
        parts = [message]
        if field_name is not None:
            parts.append(f"field={field_name!r}")
        if line is not None:
            parts.append(f"line={line}")
        super().__init__("; ".join(parts))
        self.field = field_name
        self.line = line


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DesignError(f"non-finite coordinates ({self.x}, {self.y})")


@dataclass(frozen=True)
class Node:
    id: str
    pos: Point2D
    kind: str = FREE
    load: tuple[float, float] = (0.0, 0.0)

    @property
    def fixed(self) -> bool:
        return self.kind != FREE


@dataclass(frozen=True)
class Member:
    id: str
    node_a: str
    node_b: str
    size_index: int = 3

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise DesignError(f"member {self.id} joins node {self.node_a} to itself")

    @property
    def pair(self) -> frozenset:
        return frozenset((self.node_a, self.node_b))

    def other(self, node_id: str) -> str:
        return self.node_b if node_id == self.node_a else self.node_a


@dataclass(frozen=True)
class Material:
    elastic_modulus: float = 200e9
    yield_stress: float = 250e6
    density: float = 7870.0

    def __post_init__(self):
        if min(self.elastic_modulus, self.yield_stress, self.density) <= 0:
            raise DesignError("material properties must be strictly positive")


@dataclass(frozen=True)
class SizeTable:
    areas: tuple[float, ...]
    second_moments: tuple[float, ...]

    def __post_init__(self):
        if len(self.areas) != len(self.second_moments) or not self.areas:
            raise DesignError("size table columns must be non-empty and equal length")
        for col in (self.areas, self.second_moments):
            if any(b <= a for a, b in zip(col, col[1:])) or col[0] <= 0:
                raise DesignError("size table must be positive and strictly increasing")

    @property
    def s_max(self) -> int:
        return len(self.areas)

    def _check(self, size_index: int) -> int:
        if not 1 <= size_index <= len(self.areas):
            raise DesignError(f"size index {size_index} outside 1..{len(self.areas)}")
        return size_index - 1

    def area(self, size_index: int) -> float:
        return self.areas[self._check(size_index)]

    def second_moment(self, size_index: int) -> float:
        return self.second_moments[self._check(size_index)]

    @classmethod
    def solid_circular(cls, count: int = 10, step: float = 0.005) -> "SizeTable":
        radii = [k * step for k in range(1, count + 1)]
        return cls(
            tuple(math.pi * r**2 for r in radii),
            tuple(math.pi * r**4 / 4 for r in radii),
        )


@dataclass(frozen=True)
class Rect:
    min: Point2D
    max: Point2D

    def __post_init__(self):
        if not (self.min.x < self.max.x and self.min.y < self.max.y):
            raise DesignError("rectangle min corner must be below max corner")

    @property
    def width(self) -> float:
        return self.max.x - self.min.x

    @property
    def height(self) -> float:
        return self.max.y - self.min.y

    def contains(self, p: Point2D) -> bool:
        return self.min.x <= p.x <= self.max.x and self.min.y <= p.y <= self.max.y

    def contains_rect(self, other: "Rect") -> bool:
        return self.contains(other.min) and self.contains(other.max)


@dataclass(frozen=True)
class Obstacle:
    rect: Rect


@dataclass(frozen=True)
class Scenario:
    bounds: Rect
    fixed_nodes: tuple[Node, ...]
    obstacles: tuple[Obstacle, ...] = ()
    material: Material = field(default_factory=Material)
    size_table: SizeTable = field(default_factory=SizeTable.solid_circular)
    iteration_budget: int = 250
    interaction_interval: int = 48
    team_size: int = 3
    fos_threshold: float = 1.0
    name: str = "unconstrained"

    def __post_init__(self):
        if self.iteration_budget <= 0 or self.interaction_interval <= 0 or self.team_size <= 0:
            raise DesignError("budget, interaction interval and team size must be positive")
        for n in self.fixed_nodes:
            if n.kind == FREE:
                raise DesignError(f"fixed node {n.id} must be a load or support node")
            if not self.bounds.contains(n.pos):
                raise DesignError(f"fixed node {n.id} lies outside the bounds")
        for obs in self.obstacles:
            if not self.bounds.contains_rect(obs.rect):
                raise DesignError("obstacle lies outside the bounds")

    @property
    def midline_x(self) -> float:
        return 0.5 * (self.bounds.min.x + self.bounds.max.x)


@dataclass(frozen=True)
class TrussDesign:
    nodes: tuple[Node, ...] = ()
    members: tuple[Member, ...] = ()

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise DesignError(f"unknown node id {node_id!r}")

    def member(self, member_id: str) -> Member:
        for m in self.members:
            if m.id == member_id:
                return m
        raise DesignError(f"unknown member id {member_id!r}")

    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def has_member(self, member_id: str) -> bool:
        return any(m.id == member_id for m in self.members)

    def find_member(self, a: str, b: str) -> Member | None:
        pair = frozenset((a, b))
        for m in self.members:
            if m.pair == pair:
                return m
        return None

    def incident(self, node_id: str) -> list[Member]:
        return [m for m in self.members if node_id in (m.node_a, m.node_b)]


def unconstrained_scenario(**overrides) -> Scenario:
    """Two corner supports and three bottom-span load points in a 10 m x 5 m box."""
    load = (0.0, -10_000.0)
    fixed = (
        Node("S0", Point2D(0.0, 0.0), SUPPORT),
        Node("L0", Point2D(2.5, 0.0), LOAD, load),
        Node("L1", Point2D(5.0, 0.0), LOAD, load),
        Node("L2", Point2D(7.5, 0.0), LOAD, load),
        Node("S1", Point2D(10.0, 0.0), SUPPORT),
    )
    kw = dict(bounds=Rect(Point2D(0.0, 0.0), Point2D(10.0, 5.0)), fixed_nodes=fixed)
    kw.update(overrides)
    return Scenario(**kw)


def constrained_scenario(**overrides) -> Scenario:
    obstacle = Obstacle(Rect(Point2D(3.5, 2.5), Point2D(6.5, 5.0)))
    kw = dict(obstacles=(obstacle,), iteration_budget=700, name="constrained")
    kw.update(overrides)
    return unconstrained_scenario(**kw)


def empty_design(scenario: Scenario) -> TrussDesign:
    return TrussDesign(nodes=tuple(scenario.fixed_nodes))


def distance(p: Point2D, q: Point2D) -> float:
    return math.hypot(q.x - p.x, q.y - p.y)


def member_length(design: TrussDesign, member_id: str) -> float:
    m = design.member(member_id)
    return distance(design.node(m.node_a).pos, design.node(m.node_b).pos)


def total_mass(design: TrussDesign, scenario: Scenario) -> float:
    nodes = design.node_map()
    rho = scenario.material.density
    table = scenario.size_table
    return sum(
        rho * table.area(m.size_index) * distance(nodes[m.node_a].pos, nodes[m.node_b].pos)
        for m in design.members
    )


def segment_intersects_obstacle(p: Point2D, q: Point2D, obs: Obstacle) -> bool:
    """Closed segment vs closed axis-aligned rectangle (Liang-Barsky clip)."""
    r = obs.rect
    if r.contains(p) or r.contains(q):
        return True
    dx, dy = q.x - p.x, q.y - p.y
    t0, t1 = 0.0, 1.0
    for d, lo, hi, start in ((dx, r.min.x, r.max.x, p.x), (dy, r.min.y, r.max.y, p.y)):
        if d == 0.0:
            if start < lo or start > hi:
                return False
            continue
        ta, tb = (lo - start) / d, (hi - start) / d
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return False
    return True


@dataclass(frozen=True)
class Violation:
    kind: str
    node_id: str | None = None
    member_id: str | None = None
    detail: str = ""


def validate_design(design: TrussDesign, scenario: Scenario) -> list[Violation]:
    out: list[Violation] = []
    seen: dict[str, Node] = {}
    for n in design.nodes:
        if n.id in seen:
            out.append(Violation("duplicate_node", node_id=n.id))
        seen[n.id] = n
        if n.kind not in NODE_KINDS:
            out.append(Violation("bad_node_kind", node_id=n.id, detail=n.kind))
        has_load = n.load[0] != 0.0 or n.load[1] != 0.0
        if n.kind == LOAD and not has_load:
            out.append(Violation("load_node_unloaded", node_id=n.id))
        if n.kind != LOAD and has_load:
            out.append(Violation("unexpected_load", node_id=n.id))
        if not scenario.bounds.contains(n.pos):
            out.append(Violation("out_of_bounds", node_id=n.id))
        for obs in scenario.obstacles:
            if obs.rect.contains(n.pos):
                out.append(Violation("obstacle_violation", node_id=n.id))
    ordered = list(design.nodes)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if distance(a.pos, b.pos) < D_MIN:
                out.append(Violation("nodes_too_close", node_id=b.id, detail=a.id))

    for fixed in scenario.fixed_nodes:
        if seen.get(fixed.id) != fixed:
            out.append(Violation("missing_fixed_node", node_id=fixed.id))

    member_ids: set[str] = set()
    pairs: set[frozenset] = set()
    s_max = scenario.size_table.s_max
    for m in design.members:
        if m.id in member_ids:
            out.append(Violation("duplicate_member_id", member_id=m.id))
        member_ids.add(m.id)
        if m.pair in pairs:
            out.append(Violation("duplicate_member", member_id=m.id))
        pairs.add(m.pair)
        if not 1 <= m.size_index <= s_max:
            out.append(Violation("size_out_of_range", member_id=m.id, detail=str(m.size_index)))
        a, b = seen.get(m.node_a), seen.get(m.node_b)
        if a is None or b is None:
            out.append(Violation("dangling_member", member_id=m.id))
            continue
        for obs in scenario.obstacles:
            if segment_intersects_obstacle(a.pos, b.pos, obs):
                out.append(Violation("obstacle_violation", member_id=m.id))
    return out


# --- JSON (de)serialization -------------------------------------------------


def _node_to_dict(n: Node) -> dict:
    d = {"id": n.id, "x": n.pos.x, "y": n.pos.y, "kind": n.kind}
    if n.load != (0.0, 0.0):
        d["load"] = [n.load[0], n.load[1]]
    return d


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ParseError(f"missing field in {where}", field_name=key)
    return d[key]


def _node_from_dict(d: dict, where: str) -> Node:
    try:
        load = d.get("load", [0.0, 0.0])
        return Node(
            str(_require(d, "id", where)),
            Point2D(float(_require(d, "x", where)), float(_require(d, "y", where))),
            str(d.get("kind", FREE)),
            (float(load[0]), float(load[1])),
        )
    except (TypeError, ValueError, IndexError, DesignError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"bad node in {where}: {exc}", field_name="nodes") from exc


def design_to_dict(design: TrussDesign) -> dict:
    return {
        "nodes": [_node_to_dict(n) for n in design.nodes],
        "members": [
            {"id": m.id, "a": m.node_a, "b": m.node_b, "size": m.size_index} for m in design.members
        ],
    }


def design_from_dict(d: dict) -> TrussDesign:
    if not isinstance(d, dict):
        raise ParseError("design must be a JSON object")
    nodes = _require(d, "nodes", "design")
    members = _require(d, "members", "design")
    if not isinstance(nodes, list) or not isinstance(members, list):
        raise ParseError("nodes and members must be lists", field_name="nodes")
    out_nodes = tuple(_node_from_dict(n, f"nodes[{i}]") for i, n in enumerate(nodes))
    out_members = []
    for i, m in enumerate(members):
        where = f"members[{i}]"
        try:
            out_members.append(
                Member(
                    str(_require(m, "id", where)),
                    str(_require(m, "a", where)),
                    str(_require(m, "b", where)),
                    int(_require(m, "size", where)),
                )
            )
        except (TypeError, ValueError, DesignError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad member in {where}: {exc}", field_name="members") from exc
    return TrussDesign(out_nodes, tuple(out_members))


def _loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc


def serialize_design(design: TrussDesign) -> str:
    return json.dumps(design_to_dict(design), indent=1)


def deserialize_design(text: str) -> TrussDesign:
    return design_from_dict(_loads(text))


def _rect_to_list(r: Rect) -> list:
    return [[r.min.x, r.min.y], [r.max.x, r.max.y]]


def _rect_from(v, key: str) -> Rect:
    try:
        (x0, y0), (x1, y1) = v
        return Rect(Point2D(float(x0), float(y0)), Point2D(float(x1), float(y1)))
    except (TypeError, ValueError, DesignError) as exc:
        raise ParseError(f"bad rectangle: {exc}", field_name=key) from exc


SCENARIO_KEYS = (
    "bounds",
    "fixed_nodes",
    "obstacles",
    "material",
    "size_table",
    "iteration_budget",
    "interaction_interval",
    "team_size",
    "fos_threshold",
)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "bounds": _rect_to_list(s.bounds),
        "fixed_nodes": [_node_to_dict(n) for n in s.fixed_nodes],
        "obstacles": [_rect_to_list(o.rect) for o in s.obstacles],
        "material": {
            "elastic_modulus": s.material.elastic_modulus,
            "yield_stress": s.material.yield_stress,
            "density": s.material.density,
        },
        "size_table": {
            "areas": list(s.size_table.areas),
            "second_moments": list(s.size_table.second_moments),
        },
        "iteration_budget": s.iteration_budget,
        "interaction_interval": s.interaction_interval,
        "team_size": s.team_size,
        "fos_threshold": s.fos_threshold,
    }


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ParseError("scenario must be a JSON object")
    for key in ("bounds", "fixed_nodes"):
        _require(d, key, "scenario")
    kw: dict = {
        "bounds": _rect_from(d["bounds"], "bounds"),
        "fixed_nodes": tuple(
            _node_from_dict(n, f"fixed_nodes[{i}]") for i, n in enumerate(d["fixed_nodes"])
        ),
        "obstacles": tuple(Obstacle(_rect_from(o, "obstacles")) for o in d.get("obstacles", [])),
        "name": str(d.get("name", "scenario")),
    }
    try:
        if "material" in d:
            kw["material"] = Material(**{k: float(v) for k, v in d["material"].items()})
        if "size_table" in d:
            st = d["size_table"]
            kw["size_table"] = SizeTable(
                tuple(float(a) for a in _require(st, "areas", "size_table")),
                tuple(float(i) for i in _require(st, "second_moments", "size_table")),
            )
        for key in ("iteration_budget", "interaction_interval", "team_size"):
            if key in d:
                kw[key] = int(d[key])
        if "fos_threshold" in d:
            kw["fos_threshold"] = float(d["fos_threshold"])
        return Scenario(**kw)
    except ParseError:
        raise
    except (TypeError, ValueError, DesignError) as exc:
        raise ParseError(f"bad scenario: {exc}") from exc


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1)


def deserialize_scenario(text: str) -> Scenario:
    return scenario_from_dict(_loads(text))


def next_id(existing: Iterable[str], prefix: str) -> str:
    """Smallest unused ``prefix<k>`` above every existing numeric suffix."""
    top = 0
    for ident in existing:
        if ident.startswith(prefix) and ident[len(prefix) :].isdigit():
            top = max(top, int(ident[len(prefix) :]))
    return f"{prefix}{top + 1}"
