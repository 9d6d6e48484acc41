"""Rasterized design states, heatmaps and the rule-based heatmap-to-action inference.

Pixel geometry: pixel ``(r, c)`` has its centre at continuous pixel coordinates
``(c + 0.5, r + 0.5)``; world y grows upwards, rows grow downwards.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .actions import (
    AddMember,
    AddNode,
    CandidateAction,
    DecreaseThickness,
    DeleteMember,
    DeleteNode,
    IncreaseThickness,
    filter_candidates,
)
from .fea import EvaluationResult, analyze
from .model import (
    FREE,
    LOAD,
    SUPPORT,
    Point2D,
    Rect,
    Scenario,
    TrussDesign,
    distance,
    next_id,
)

RESOLUTION = 128
MARGIN_PX = 6
NODE_RADIUS_PX = 3.0
SSIM_WINDOW = 11
SSIM_C1 = (0.01 * 1.0) ** 2
SSIM_C2 = (0.03 * 1.0) ** 2


def member_width_px(size_index: int) -> int:
    return 1 + size_index


@dataclass(frozen=True)
class InferenceConfig:
    threshold: float = 0.5
    min_area: int = 4
    snap_px: float = 5.0
    aspect: float = 3.0
    k_conn: int = 2
    max_candidates: int = 16
    overlap: float = 0.5
    stripe_margin_px: float = 1.0
    grid: float = 0.1


DEFAULT_INFERENCE = InferenceConfig()


@dataclass(frozen=True)
class Frame:
    """Fixed affine map between world metres and pixel coordinates."""

    width: int
    height: int
    scale: float
    x0: float
    y1: float
    off_u: float
    off_v: float

    def to_px(self, p: Point2D) -> tuple[float, float]:
        return self.off_u + (p.x - self.x0) * self.scale, self.off_v + (self.y1 - p.y) * self.scale

    def to_world(self, u: float, v: float) -> Point2D:
        return Point2D(self.x0 + (u - self.off_u) / self.scale, self.y1 - (v - self.off_v) / self.scale)


@lru_cache(maxsize=32)
def frame_for(bounds: Rect, resolution: int = RESOLUTION) -> Frame:
    w = h = resolution
    scale = min((w - 2 * MARGIN_PX) / bounds.width, (h - 2 * MARGIN_PX) / bounds.height)
    off_u = 0.5 * (w - bounds.width * scale)
    off_v = 0.5 * (h - bounds.height * scale)
    return Frame(w, h, scale, bounds.min.x, bounds.max.y, off_u, off_v)


# --- rendering ----------------------------------------------------------------


def render(design: TrussDesign, scenario: Scenario, resolution: int = RESOLUTION) -> np.ndarray:
    frame = frame_for(scenario.bounds, resolution)
    img = np.zeros((frame.height, frame.width))
    pts = {n.id: frame.to_px(n.pos) for n in design.nodes}
    for m in design.members:
        (ua, va), (ub, vb) = pts[m.node_a], pts[m.node_b]
        kernels.draw_segment(img, ua, va, ub, vb, 0.5 * member_width_px(m.size_index), 1.0)
    for u, v in pts.values():
        kernels.draw_disc(img, u, v, NODE_RADIUS_PX, 1.0)
    return img


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    if x.shape != y.shape:
        raise ValueError(f"raster dimensions differ: {x.shape} vs {y.shape}")
    a = np.ascontiguousarray(x, dtype=float)
    b = np.ascontiguousarray(y, dtype=float)
    return float(np.mean(kernels.ssim_map(a, b, SSIM_WINDOW, SSIM_C1, SSIM_C2)))


# --- heatmaps -------------------------------------------------------------------


@dataclass
class Heatmap:
    add: np.ndarray
    remove: np.ndarray

    def __post_init__(self):
        if self.add.shape != self.remove.shape:
            raise ValueError("add and remove channels must share dimensions")

    @property
    def shape(self) -> tuple[int, int]:
        return self.add.shape

    @classmethod
    def zeros(cls, resolution: int = RESOLUTION) -> "Heatmap":
        return cls(np.zeros((resolution, resolution)), np.zeros((resolution, resolution)))

    def __eq__(self, other):
        return (
            isinstance(other, Heatmap)
            and np.array_equal(self.add, other.add)
            and np.array_equal(self.remove, other.remove)
        )


def threshold_heatmap(h: Heatmap, tau: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < tau < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    add = (h.add >= tau) & (h.add > h.remove)
    rem = (h.remove >= tau) & (h.remove > h.add)
    return add, rem


def target_image(current: np.ndarray, h: Heatmap, tau: float = 0.5) -> np.ndarray:
    """Current render with predicted additions set to 1 and removals to 0."""
    add, rem = threshold_heatmap(h, tau)
    out = current.copy()
    out[add] = 1.0
    out[rem] = 0.0
    return out


# --- connected components -------------------------------------------------------------


@dataclass
class Blob:
    id: int
    rows: np.ndarray
    cols: np.ndarray
    centroid: Point2D
    bbox: tuple[int, int, int, int]  # row0, col0, row1, col1 inclusive
    mean_intensity: float
    polarity: str = "add"
    centroid_px: tuple[float, float] = field(default=(0.0, 0.0))

    @property
    def size(self) -> int:
        return len(self.rows)


def connected_components(
    mask: np.ndarray,
    frame: Frame | None = None,
    intensity: np.ndarray | None = None,
    polarity: str = "add",
    min_area: int = DEFAULT_INFERENCE.min_area,
) -> list[Blob]:
    """4-connected blobs of ``mask`` with at least ``min_area`` pixels.

    Ordered by pixel count (descending), then by the top-left corner of the
    bounding box.
    """
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    labels, count = kernels.label4(m)
    if count == 0:
        return []
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    sizes = np.bincount(flat, minlength=count + 1)
    starts = np.concatenate(([0], np.cumsum(sizes)))
    width = m.shape[1]
    blobs = []
    for lab in range(1, count + 1):
        if sizes[lab] < min_area:
            continue
        idx = order[starts[lab] : starts[lab + 1]]
        rows, cols = np.divmod(idx, width)
        cu, cv = float(cols.mean()) + 0.5, float(rows.mean()) + 0.5
        centroid = frame.to_world(cu, cv) if frame is not None else Point2D(cu, cv)
        mean_i = float(intensity.ravel()[idx].mean()) if intensity is not None else 1.0
        bbox = (int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))
        blobs.append(Blob(0, rows, cols, centroid, bbox, mean_i, polarity, (cu, cv)))
    blobs.sort(key=lambda b: (-b.size, b.bbox[0], b.bbox[1]))
    for i, b in enumerate(blobs):
        b.id = i
    return blobs


# --- inference ---------------------------------------------------------------------------


def _seg_distance(pu, pv, a, b) -> np.ndarray:
    """Distance from pixel centres to the pixel-space segment a-b."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    len2 = dx * dx + dy * dy
    if len2 > 0:
        t = np.clip(((pu - a[0]) * dx + (pv - a[1]) * dy) / len2, 0.0, 1.0)
    else:
        t = 0.0
    return np.hypot(pu - (a[0] + t * dx), pv - (a[1] + t * dy))


def _principal_extent(blob: Blob):
    pu = blob.cols + 0.5
    pv = blob.rows + 0.5
    cu, cv = blob.centroid_px
    if blob.size < 2:
        return 1.0, 1.0, (cu, cv), (cu, cv)
    cov = np.cov(np.vstack([pu - cu, pv - cv]))
    evals, evecs = np.linalg.eigh(cov)
    major = evecs[:, 1]
    minor = evecs[:, 0]
    s = (pu - cu) * major[0] + (pv - cv) * major[1]
    t = (pu - cu) * minor[0] + (pv - cv) * minor[1]
    length = float(s.max() - s.min()) + 1.0
    width = float(t.max() - t.min()) + 1.0
    e0 = (cu + s.min() * major[0], cv + s.min() * major[1])
    e1 = (cu + s.max() * major[0], cv + s.max() * major[1])
    return length, width, e0, e1


def snap(p: Point2D, grid: float) -> Point2D:
    return Point2D(round(round(p.x / grid) * grid, 10), round(round(p.y / grid) * grid, 10))


def infer_candidates(
    h: Heatmap,
    design: TrussDesign,
    scenario: Scenario,
    config: InferenceConfig = DEFAULT_INFERENCE,
) -> list[CandidateAction]:
    frame = frame_for(scenario.bounds, h.shape[0])
    if h.shape != (frame.height, frame.width):
        raise ValueError(f"heatmap {h.shape} does not match render resolution {frame.height}")
    add_mask, rem_mask = threshold_heatmap(h, config.threshold)
    blobs = connected_components(add_mask, frame, h.add, "add", config.min_area)
    blobs += connected_components(rem_mask, frame, h.remove, "remove", config.min_area)
    blobs.sort(key=lambda b: (-b.size, b.bbox[0], b.bbox[1], b.polarity != "add"))
    if not blobs:
        return []

    node_px = {n.id: frame.to_px(n.pos) for n in design.nodes}
    members = list(design.members)
    seg_px = [(node_px[m.node_a], node_px[m.node_b]) for m in members]

    raw: list[CandidateAction] = []
    for blob_no, blob in enumerate(blobs):
        pu = blob.cols + 0.5
        pv = blob.rows + 0.5
        best_member, best_frac, nearest_member, nearest_gap = None, 0.0, None, math.inf
        for m, (a, b) in zip(members, seg_px):
            d = _seg_distance(pu, pv, a, b)
            half = 0.5 * member_width_px(m.size_index)
            frac = float(np.count_nonzero(d <= half + config.stripe_margin_px)) / blob.size
            if frac > best_frac:
                best_member, best_frac = m, frac
            gap = max(0.0, float(d.min()) - half)
            if gap < nearest_gap:
                nearest_member, nearest_gap = m, gap
        on_stripe = best_member is not None and best_frac >= config.overlap

        def emit(action):
            raw.append(CandidateAction(action, source_blob=blob_no))

        if blob.polarity == "add":
            if on_stripe:
                emit(IncreaseThickness(best_member.id))
                continue
            length, width, e0, e1 = _principal_extent(blob)
            if length / width >= config.aspect:
                # snap distance is measured to the edge of the rendered node disc
                na = _nearest_node(node_px, e0, config.snap_px + NODE_RADIUS_PX)
                nb = _nearest_node(node_px, e1, config.snap_px + NODE_RADIUS_PX)
                if na is not None and nb is not None and na != nb:
                    emit(AddMember(na, nb))
                    continue
            pos = snap(blob.centroid, config.grid)
            emit(AddNode(pos))
            new_id = next_id(node_px, "N")
            near = sorted(design.nodes, key=lambda n: (distance(n.pos, pos), n.id))[: config.k_conn]
            for n in near:
                emit(AddMember(new_id, n.id))
        else:
            if on_stripe:
                emit(DeleteMember(best_member.id))
                continue
            covered = _covered_node(design, node_px, pu, pv, config.overlap)
            if covered is not None:
                emit(DeleteNode(covered))
            elif nearest_member is not None and nearest_gap <= config.snap_px:
                emit(DecreaseThickness(nearest_member.id))

    seen = set()
    unique = []
    for c in raw:
        if c.action not in seen:
            seen.add(c.action)
            unique.append(c)
    return filter_candidates(unique, design, scenario)[: config.max_candidates]


def _nearest_node(node_px: dict, p, radius: float) -> str | None:
    best, best_d = None, radius
    for nid, (u, v) in node_px.items():
        d = math.hypot(u - p[0], v - p[1])
        if d <= best_d:
            best, best_d = nid, d
    return best


def _covered_node(design, node_px, pu, pv, frac: float) -> str | None:
    """First node whose disc lies at least ``frac`` inside the blob."""
    disc_area = _disc_pixel_count(NODE_RADIUS_PX)
    for n in design.nodes:
        u, v = node_px[n.id]
        inside = np.count_nonzero(np.hypot(pu - u, pv - v) <= NODE_RADIUS_PX)
        if inside >= frac * disc_area:
            return n.id
    return None


@lru_cache(maxsize=8)
def _disc_pixel_count(radius: float) -> int:
    img = np.zeros((32, 32))
    kernels.draw_disc(img, 16.0, 16.0, radius, 1.0)
    return int(img.sum())


# --- synthetic suggester ----------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    intensity: float = 0.9
    disc_radius_px: float = 4.0
    thin_radius_px: float = 3.0
    stripe_half_px: float = 2.0
    jitter_px: float = 2.0
    end_gaps_px: tuple = (0.0, 2.0, 4.0, 6.0)
    aspect_margin: float = 3.5
    max_member_overlap: float = 0.5
    prune_radius_px: float = 6.0
    prune_lean_px: float = 4.0
    bridges: int = 4
    partners: int = 2
    hot_members: int = 2
    overloaded_members: int = 3
    demand_utilization: float = 0.0
    gate_overloaded: bool = True
    idle_utilization: float = 0.05
    thin_members: int = 2
    thin_utilization: float = 0.5
    polygon_min_px: int = 80
    polygon_max_blobs: int = 1


DEFAULT_SYNTH = SynthConfig()


def _connected_to_support(design: TrussDesign) -> set[str]:
    adj: dict[str, set[str]] = {n.id: set() for n in design.nodes}
    for m in design.members:
        adj[m.node_a].add(m.node_b)
        adj[m.node_b].add(m.node_a)
    seen = {n.id for n in design.nodes if n.kind == SUPPORT}
    stack = list(seen)
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen


def _mechanism_modes(design: TrussDesign, scenario: Scenario) -> np.ndarray:
    """Null-space basis of the free-DOF stiffness, as (k, n_nodes, 2) motions."""
    from .fea import assemble

    K, _, free = assemble(design, scenario)
    n = len(design.nodes)
    if len(free) == 0:
        return np.zeros((0, n, 2))
    Kff = K[np.ix_(free, free)]
    scale = float(np.max(np.abs(np.diag(Kff)))) or 1.0
    evals, evecs = np.linalg.eigh(Kff / scale)
    null = evecs[:, evals < 1e-9]
    modes = np.zeros((null.shape[1], 2 * n))
    modes[:, free] = null.T
    return modes.reshape(-1, n, 2)


def _jitter(rng, cfg, direction=None):
    if direction is None:
        return rng.uniform(-cfg.jitter_px, cfg.jitter_px, size=2)
    s = rng.uniform(-cfg.jitter_px, cfg.jitter_px)
    return np.array([s * direction[0], s * direction[1]])


def synth_heatmap(
    design: TrussDesign,
    scenario: Scenario,
    evaluation: EvaluationResult | None = None,
    rng_state=0,
    resolution: int = RESOLUTION,
    config: SynthConfig = DEFAULT_SYNTH,
) -> Heatmap:
    """Stand-in for a learned next-state predictor.

    Unsolvable designs get bridging stripes (load paths, then mechanism
    partners). Solvable designs get thickening discs on the most utilized
    members, node discs inside large unbraced panels, removal over idle
    members and thinning marks beside lightly used ones.
    """
    rng = np.random.default_rng(rng_state)
    frame = frame_for(scenario.bounds, resolution)
    h = Heatmap.zeros(resolution)
    analysis = analyze(design, scenario)
    result = evaluation if evaluation is not None else analysis.result
    nodes = design.node_map()

    if not result.solvable or analysis.solution is None:
        _bridge_blobs(h, design, scenario, frame, rng, config)
        return h

    util = {f.member_id: f.utilization for f in analysis.forces}
    ordered = sorted(design.members, key=lambda m: (-util[m.id], m.id))
    if not result.feasible and config.gate_overloaded:
        # overloaded structure: mark every member over capacity, never remove
        hot = [m for m in ordered if util[m.id] * scenario.fos_threshold > 1.0]
        for m in hot[: config.overloaded_members]:
            _member_disc(h.add, frame, nodes, m, 0.0, config.disc_radius_px, rng, config)
        _polygon_blobs(h.add, design, scenario, frame, rng, config)
        return h
    demand = [m for m in ordered if util[m.id] >= config.demand_utilization]
    for m in demand[: config.hot_members]:
        _member_disc(h.add, frame, nodes, m, 0.0, config.disc_radius_px, rng, config)
    _polygon_blobs(h.add, design, scenario, frame, rng, config)
    for m in design.members:
        if util[m.id] < config.idle_utilization:
            _member_disc(h.remove, frame, nodes, m, 0.0, config.disc_radius_px, rng, config)
    lightly = [
        m
        for m in sorted(design.members, key=lambda m: (util[m.id], m.id))
        if config.idle_utilization <= util[m.id] < config.thin_utilization and m.size_index > 1
    ]
    for m in lightly[: config.thin_members]:
        offset = 0.5 * member_width_px(m.size_index) + config.stripe_half_px + config.thin_radius_px
        _member_disc(h.remove, frame, nodes, m, offset, config.thin_radius_px, rng, config)
    return h


def _member_disc(field_, frame, nodes, m, offset, radius, rng, cfg):
    (ua, va), (ub, vb) = frame.to_px(nodes[m.node_a].pos), frame.to_px(nodes[m.node_b].pos)
    length = math.hypot(ub - ua, vb - va)
    eu, ev = (ub - ua) / length, (vb - va) / length
    cu, cv = 0.5 * (ua + ub) - ev * offset, 0.5 * (va + vb) + eu * offset
    ju, jv = _jitter(rng, cfg, (eu, ev))
    kernels.draw_disc(field_, cu + ju, cv + jv, radius, cfg.intensity)


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper crossing of two segments (touching at an endpoint does not count)."""

    def orient(a, b, c):
        return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _point_segment_distance(p: Point2D, a: Point2D, b: Point2D) -> float:
    dx, dy = b.x - a.x, b.y - a.y
    len2 = dx * dx + dy * dy
    t = 0.0 if len2 == 0 else min(1.0, max(0.0, ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2))
    return math.hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy))


def _open_pairs(design: TrussDesign, clearance: float) -> list[tuple]:
    """Unlinked node pairs, shortest first, that neither cross a member nor graze a node."""
    nodes = list(design.nodes)
    pos = {n.id: n.pos for n in nodes}
    linked = {m.pair for m in design.members}
    segs = [(pos[m.node_a], pos[m.node_b], m.pair) for m in design.members]
    out = []
    for i, a in enumerate(nodes):
        for b in nodes[i + 1 :]:
            if frozenset((a.id, b.id)) in linked:
                continue
            if any(
                _point_segment_distance(c.pos, a.pos, b.pos) < clearance
                for c in nodes
                if c.id not in (a.id, b.id)
            ):
                continue
            if any(_segments_cross(a.pos, b.pos, p, q) for p, q, _ in segs):
                continue
            out.append((distance(a.pos, b.pos), a.id, b.id, a, b))
    out.sort(key=lambda t: t[:3])
    return [(t[3], t[4]) for t in out]


def _bridge_blobs(h, design, scenario, frame, rng, cfg):
    nodes = list(design.nodes)
    connected = _connected_to_support(design)
    linked = {m.pair for m in design.members}
    pairs: list[tuple] = []
    # load points without a path to a support: link to nearest anchored node
    for n in nodes:
        if n.kind != LOAD or n.id in connected:
            continue
        anchored = [o for o in nodes if o.id in connected and o.id != n.id]
        if anchored:
            target = min(anchored, key=lambda o: (distance(n.pos, o.pos), o.id))
            pairs.append((n, target))
            connected.add(n.id)

    clearance = (NODE_RADIUS_PX + 1.0) / frame.scale
    open_pairs = _open_pairs(design, clearance)
    if not open_pairs:
        open_pairs = _mechanism_partners(design, scenario, linked, cfg)
    pairs.extend(open_pairs)

    # stripes in one heatmap form a matching so that blobs never merge
    used: set[str] = set()
    drawn: list[tuple] = []
    for a, b in pairs:
        if len(drawn) >= cfg.bridges:
            break
        if a.id in used or b.id in used or frozenset((a.id, b.id)) in linked:
            continue
        if any(_segments_cross(a.pos, b.pos, p.pos, q.pos) for p, q in drawn):
            continue
        mark = _bridge_mark(a, b, design, frame, _jitter_along(rng, cfg, frame, a, b), cfg)
        if mark is not None:
            used.update((a.id, b.id))
            drawn.append((a, b))
            np.maximum(h.add, mark, out=h.add)

    # a member drawn straight over a node it does not join hides that node
    for m in design.members:
        pa, pb = design.node(m.node_a).pos, design.node(m.node_b).pos
        if any(
            _point_segment_distance(n.pos, pa, pb) < clearance for n in nodes if n.id not in (m.node_a, m.node_b)
        ):
            _member_disc(h.remove, frame, design.node_map(), m, 0.0, cfg.disc_radius_px, rng, cfg)

    # dangling free nodes that cannot be braced from anywhere get a removal mark
    degree = {n.id: 0 for n in nodes}
    for m in design.members:
        degree[m.node_a] += 1
        degree[m.node_b] += 1
    for n in nodes:
        if n.kind != FREE or degree[n.id] > 1 or n.id in used:
            continue
        partners = [(a, b) for a, b in open_pairs if n.id in (a.id, b.id)]
        if any(_bridge_mark(a, b, design, frame, (0.0, 0.0), cfg) is not None for a, b in partners):
            continue
        u, v = frame.to_px(n.pos)
        for m in design.incident(n.id):
            # lean away from the lone member so the mark covers the node, not the stripe
            other = frame.to_px(design.node(m.other(n.id)).pos)
            d = math.hypot(other[0] - u, other[1] - v)
            u, v = u - cfg.prune_lean_px * (other[0] - u) / d, v - cfg.prune_lean_px * (other[1] - v) / d
        kernels.draw_disc(h.remove, u, v, cfg.prune_radius_px, cfg.intensity)


def _jitter_along(rng, cfg, frame, a, b):
    (ua, va), (ub, vb) = frame.to_px(a.pos), frame.to_px(b.pos)
    length = math.hypot(ub - ua, vb - va)
    return tuple(_jitter(rng, cfg, ((ub - ua) / length, (vb - va) / length)))


def _bridge_mark(a, b, design, frame, offset, cfg) -> np.ndarray | None:
    """Stripe from ``a`` to ``b`` that reads as a new member, or None if none fits."""
    min_len = cfg.aspect_margin * (2 * cfg.stripe_half_px + 1) - 2 * cfg.stripe_half_px
    (ua, va), (ub, vb) = frame.to_px(a.pos), frame.to_px(b.pos)
    length = math.hypot(ub - ua, vb - va)
    eu, ev = (ub - ua) / length, (vb - va) / length
    ju, jv = offset
    # back the ends off crowded nodes until the mark no longer reads as thickening
    for gap in cfg.end_gaps_px:
        if length - 2 * gap < min_len:
            return None
        mark = np.zeros((frame.height, frame.width))
        kernels.draw_segment(
            mark,
            ua + ju + gap * eu,
            va + jv + gap * ev,
            ub + ju - gap * eu,
            vb + jv - gap * ev,
            cfg.stripe_half_px,
            cfg.intensity,
        )
        if _member_overlap(mark, design, frame) < cfg.max_member_overlap:
            return mark
    return None


def _member_overlap(mark: np.ndarray, design: TrussDesign, frame: Frame) -> float:
    """Largest fraction of a mark's pixels lying on one rendered member stripe."""
    rows, cols = np.nonzero(mark)
    if rows.size == 0 or not design.members:
        return 0.0
    pu, pv = cols + 0.5, rows + 0.5
    nodes = design.node_map()
    best = 0.0
    for m in design.members:
        d = _seg_distance(pu, pv, frame.to_px(nodes[m.node_a].pos), frame.to_px(nodes[m.node_b].pos))
        half = 0.5 * member_width_px(m.size_index) + DEFAULT_INFERENCE.stripe_margin_px
        best = max(best, float(np.count_nonzero(d <= half)) / rows.size)
    return best


def _mechanism_partners(design, scenario, linked, cfg) -> list[tuple]:
    """For the most mobile nodes, the nearest partners whose link resists the motion."""
    nodes = list(design.nodes)
    modes = _mechanism_modes(design, scenario)
    if not len(modes):
        return []
    pairs = []
    motion = np.sqrt((modes**2).sum(axis=(0, 2)))
    movers = [i for i in np.argsort(-motion, kind="stable") if motion[i] > 1e-6][: cfg.bridges]
    for i in movers:
        ni = nodes[i]
        scored = []
        for j, nj in enumerate(nodes):
            if j == i or frozenset((ni.id, nj.id)) in linked:
                continue
            d = distance(ni.pos, nj.pos)
            e = np.array([nj.pos.x - ni.pos.x, nj.pos.y - ni.pos.y]) / d
            kill = float(np.sqrt((((modes[:, j] - modes[:, i]) @ e) ** 2).sum()))
            scored.append((kill, d, nj))
        if not scored:
            continue
        top = max(s[0] for s in scored)
        if top <= 1e-6:
            continue
        useful = sorted((s for s in scored if s[0] >= 0.25 * top), key=lambda s: (s[1], s[2].id))
        pairs.extend((ni, s[2]) for s in useful[: cfg.partners])
    return pairs


def _polygon_blobs(field_, design, scenario, frame, rng, cfg):
    """Node discs at the centroids of large enclosed panels bounded by >3 nodes."""
    if len(design.members) < 4:
        return
    img = render(design, scenario, frame.width)
    background = np.ascontiguousarray(img == 0.0, dtype=np.uint8)
    regions = connected_components(background, None, None, "add", cfg.polygon_min_px)
    node_px = np.array([frame.to_px(n.pos) for n in design.nodes])
    placed = 0
    for reg in regions:
        r0, c0, r1, c1 = reg.bbox
        if r0 == 0 or c0 == 0 or r1 == frame.height - 1 or c1 == frame.width - 1:
            continue
        pu, pv = reg.cols + 0.5, reg.rows + 0.5
        touching = 0
        for u, v in node_px:
            if np.min(np.hypot(pu - u, pv - v)) <= NODE_RADIUS_PX + 3.0:
                touching += 1
        if touching <= 3:
            continue
        cu, cv = reg.centroid_px
        ju, jv = _jitter(rng, cfg)
        kernels.draw_disc(field_, cu + ju, cv + jv, cfg.disc_radius_px, cfg.intensity)
        placed += 1
        if placed >= cfg.polygon_max_blobs:
            break


# --- portable graymap I/O ---------------------------------------------------------------


def to_pgm_bytes(img: np.ndarray) -> bytes:
    h, w = img.shape
    data = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes()


def from_pgm_bytes(raw: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 256:
        raise ValueError("only 8-bit PGM supported")
    pos += 1
    data = np.frombuffer(raw[pos : pos + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise ValueError("truncated PGM payload")
    return data.reshape(h, w).astype(float) / maxval


def write_pgm(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(to_pgm_bytes(img))


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return from_pgm_bytes(fh.read())


def write_heatmap(prefix, h: Heatmap) -> tuple[str, str]:
    add_path, rem_path = f"{prefix}.add.pgm", f"{prefix}.rem.pgm"
    write_pgm(add_path, h.add)
    write_pgm(rem_path, h.remove)
    return add_path, rem_path


def read_heatmap(prefix) -> Heatmap:
    return Heatmap(read_pgm(f"{prefix}.add.pgm"), read_pgm(f"{prefix}.rem.pgm"))


class FileHeatmapSuggester:
    """Serves heatmaps from ``<directory>/<key>.add.pgm`` / ``.rem.pgm`` pairs."""

    def __init__(self, directory):
        self.directory = directory

    def __call__(self, key: str) -> Heatmap:
        return read_heatmap(os.path.join(self.directory, key))
