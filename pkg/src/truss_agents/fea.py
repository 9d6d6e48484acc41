"""Direct stiffness analysis of pin-jointed trusses and the design objective."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .model import SUPPORT, Material, Member, Scenario, SizeTable, TrussDesign, total_mass

FOS_SENTINEL = 1e9  # stands in for +inf when no member carries load
ZERO_FORCE = 1e-9  # N
PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class EvaluationResult:
    fos: float
    mass: float
    swr: float | None
    feasible: bool
    solvable: bool

    def to_dict(self) -> dict:
        return {
            "fos": self.fos,
            "mass": self.mass,
            "swr": self.swr,
            "feasible": self.feasible,
            "solvable": self.solvable,
        }

    @property
    def rswr(self) -> float | None:
        """SWR if the design counts toward feasible-only metrics, else None."""
        return self.swr if self.feasible else None


@dataclass(frozen=True)
class MemberForce:
    member_id: str
    axial_force: float
    capacity: float
    utilization: float


@dataclass(frozen=True)
class Solution:
    """Displacements keyed by node id, plus the free-DOF system used to find them."""

    displacements: dict
    residual: float
    load_norm: float


class Unsolvable(Exception):
    """The free-DOF stiffness matrix is singular: mechanism or floating node."""


def _geometry(design: TrussDesign):
    index = {n.id: i for i, n in enumerate(design.nodes)}
    xy = np.array([(n.pos.x, n.pos.y) for n in design.nodes], dtype=float).reshape(-1, 2)
    ia = np.array([index[m.node_a] for m in design.members], dtype=np.intp)
    ib = np.array([index[m.node_b] for m in design.members], dtype=np.intp)
    d = xy[ib] - xy[ia]
    lengths = np.hypot(d[:, 0], d[:, 1])
    cosines = d / lengths[:, None] if len(lengths) else d
    return index, ia, ib, lengths, cosines


def _axial_stiffness(design: TrussDesign, scenario: Scenario, lengths: np.ndarray) -> np.ndarray:
    areas = np.array([scenario.size_table.area(m.size_index) for m in design.members])
    return scenario.material.elastic_modulus * areas / lengths if len(lengths) else areas


def assemble(design: TrussDesign, scenario: Scenario):
    """Global stiffness matrix, load vector and free-DOF index array."""
    index, ia, ib, lengths, e = _geometry(design)
    n = len(design.nodes)
    K = np.zeros((2 * n, 2 * n))
    if len(design.members):
        k = _axial_stiffness(design, scenario, lengths)
        outer = e[:, :, None] * e[:, None, :] * k[:, None, None]  # (m, 2, 2)
        dof_a = np.stack([2 * ia, 2 * ia + 1], axis=1)
        dof_b = np.stack([2 * ib, 2 * ib + 1], axis=1)
        for da, db, sign in ((dof_a, dof_a, 1), (dof_b, dof_b, 1), (dof_a, dof_b, -1), (dof_b, dof_a, -1)):
            np.add.at(K, (da[:, :, None], db[:, None, :]), sign * outer)
    f = np.zeros(2 * n)
    fixed = np.zeros(2 * n, dtype=bool)
    for i, node in enumerate(design.nodes):
        f[2 * i : 2 * i + 2] = node.load
        if node.kind == SUPPORT:
            fixed[2 * i : 2 * i + 2] = True
    return K, f, np.flatnonzero(~fixed)


def _lu_solve(K: np.ndarray, f: np.ndarray) -> np.ndarray:
    diag_max = float(np.max(np.abs(np.diag(K)))) if K.size else 0.0
    if diag_max == 0.0:
        raise Unsolvable("no stiffness on free degrees of freedom")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(K, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * diag_max:
        raise Unsolvable("singular stiffness matrix")
    u = scipy.linalg.lu_solve((lu, piv), f, check_finite=False)
    # one refinement pass keeps nodal equilibrium well below 1e-6 N
    u += scipy.linalg.lu_solve((lu, piv), f - K @ u, check_finite=False)
    return u


def assemble_and_solve(design: TrussDesign, scenario: Scenario) -> Solution:
    """Nodal displacements; raises :class:`Unsolvable` for mechanisms."""
    K, f, free = assemble(design, scenario)
    if len(free) == 0:
        u_full = np.zeros(len(f))
        return Solution(_by_node(design, u_full), 0.0, 0.0)
    Kff = K[np.ix_(free, free)]
    ff = f[free]
    u = _lu_solve(Kff, ff)
    residual = float(np.linalg.norm(Kff @ u - ff))
    load_norm = float(np.linalg.norm(ff))
    if not np.all(np.isfinite(u)) or residual > 1e-8 * max(1.0, load_norm):
        raise Unsolvable("stiffness solve failed residual check")
    u_full = np.zeros(len(f))
    u_full[free] = u
    return Solution(_by_node(design, u_full), residual, load_norm)


def _by_node(design: TrussDesign, u: np.ndarray) -> dict:
    return {n.id: (float(u[2 * i]), float(u[2 * i + 1])) for i, n in enumerate(design.nodes)}


def member_capacity(
    member: Member, length: float, material: Material, size_table: SizeTable, compression: bool = True
) -> float:
    area = size_table.area(member.size_index)
    yield_cap = material.yield_stress * area
    if not compression:
        return yield_cap
    euler = math.pi**2 * material.elastic_modulus * size_table.second_moment(member.size_index) / length**2
    return min(yield_cap, euler)


def member_forces(design: TrussDesign, solution: Solution, scenario: Scenario) -> list[MemberForce]:
    if not design.members:
        return []
    _, ia, ib, lengths, e = _geometry(design)
    k = _axial_stiffness(design, scenario, lengths)
    u = np.array([solution.displacements[n.id] for n in design.nodes])
    elong = np.einsum("ij,ij->i", u[ib] - u[ia], e)
    axial = k * elong
    out = []
    for m, length, force in zip(design.members, lengths, axial):
        cap = member_capacity(m, float(length), scenario.material, scenario.size_table, compression=force < 0)
        out.append(MemberForce(m.id, float(force), cap, abs(float(force)) / cap))
    return out


def fos_from_forces(forces: list[MemberForce]) -> float:
    loaded = [f.capacity / abs(f.axial_force) for f in forces if abs(f.axial_force) >= ZERO_FORCE]
    return min(loaded) if loaded else FOS_SENTINEL


@dataclass(frozen=True)
class Analysis:
    result: EvaluationResult
    forces: tuple[MemberForce, ...] = ()
    solution: Solution | None = None


def _result(fos: float, mass: float, solvable: bool, scenario: Scenario) -> EvaluationResult:
    swr = fos / mass if solvable and mass > 0 else None
    feasible = solvable and fos >= scenario.fos_threshold
    return EvaluationResult(fos, mass, swr, feasible, solvable)


@lru_cache(maxsize=8192)
def analyze(design: TrussDesign, scenario: Scenario) -> Analysis:
    mass = total_mass(design, scenario)
    if not design.members:
        return Analysis(_result(0.0, mass, False, scenario))
    try:
        sol = assemble_and_solve(design, scenario)
    except Unsolvable:
        return Analysis(_result(0.0, mass, False, scenario))
    forces = tuple(member_forces(design, sol, scenario))
    return Analysis(_result(fos_from_forces(list(forces)), mass, True, scenario), forces, sol)


def factor_of_safety(design: TrussDesign, scenario: Scenario) -> float:
    return analyze(design, scenario).result.fos


def evaluate(design: TrussDesign, scenario: Scenario) -> EvaluationResult:
    return analyze(design, scenario).result


def rank_key(result: EvaluationResult) -> tuple:
    """Sort key consistent with :func:`objective_rank` (larger is better)."""
    if result.feasible:
        return (1, result.swr)
    return (0, result.fos)


def objective_rank(a: EvaluationResult, b: EvaluationResult) -> int:
    """1 if ``a`` is better, -1 if ``b`` is better, 0 on an exact tie."""
    ka, kb = rank_key(a), rank_key(b)
    return (ka > kb) - (ka < kb)
