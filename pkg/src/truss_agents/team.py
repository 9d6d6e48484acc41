"""Three-agent team runs with periodic best-design sharing, traces and metrics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .actions import AddNode, action_from_dict, apply
from .agents import AgentConfig, AgentState, StepRecord, agent_step
from .fea import EvaluationResult, evaluate, rank_key
from .model import (
    D_MIN,
    Scenario,
    TrussDesign,
    design_from_dict,
    design_to_dict,
    distance,
    empty_design,
    Point2D,
)

MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def agent_seed(team_seed: int, agent_index: int) -> int:
    return splitmix64((team_seed & MASK64) ^ splitmix64(agent_index))


def initial_state(scenario: Scenario, rng_state, n_init: int = 4) -> TrussDesign:
    """Fixed nodes plus ``n_init`` free nodes drawn uniformly by rejection."""
    rng = np.random.default_rng(rng_state)
    design = empty_design(scenario)
    b = scenario.bounds
    placed = 0
    attempts = 0
    while placed < n_init:
        attempts += 1
        if attempts > 10_000:
            raise RuntimeError("could not place initial nodes; bounds too crowded")
        x, y = rng.uniform(b.min.x, b.max.x), rng.uniform(b.min.y, b.max.y)
        p = Point2D(round(float(x), 3), round(float(y), 3))
        if any(o.rect.contains(p) for o in scenario.obstacles):
            continue
        if any(distance(p, n.pos) < D_MIN for n in design.nodes):
            continue
        design = apply(AddNode(p), design, scenario)
        placed += 1
    return design


def synchronize(designs: list[TrussDesign], scenario: Scenario) -> list[TrussDesign]:
    """Every agent adopts the pool's best design (lowest index on ties)."""
    if not designs:
        raise ValueError("synchronize needs at least one design")
    keys = [rank_key(evaluate(d, scenario)) for d in designs]
    best = 0
    for i, k in enumerate(keys):
        if k > keys[best]:
            best = i
    return [designs[best]] * len(designs)


def best_index(evals: list[EvaluationResult]) -> int:
    best = 0
    for i, e in enumerate(evals):
        if rank_key(e) > rank_key(evals[best]):
            best = i
    return best


@dataclass
class TeamTrace:
    scenario: str
    variant: str
    team: int
    team_seed: int
    agent_seeds: list[int]
    initial_designs: list[TrussDesign]
    steps: list[list[StepRecord]]
    team_best: list[EvaluationResult]
    sync_iterations: list[int] = field(default_factory=list)
    terminated: list[int | None] = field(default_factory=list)
    budget: int = 0
    final_designs: list[TrussDesign] = field(default_factory=list)
    initial_evals: list[EvaluationResult] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.team_best)

    # one JSON object per line; first the header, then records in execution order
    def to_jsonl(self) -> str:
        lines = [
            {
                "kind": "header",
                "team": self.team,
                "scenario": self.scenario,
                "variant": self.variant,
                "team_seed": self.team_seed,
                "agent_seeds": self.agent_seeds,
                "budget": self.budget,
            }
        ]
        for a, d in enumerate(self.initial_designs):
            rec = {"kind": "init", "team": self.team, "agent": a, "iteration": 0, "design": design_to_dict(d)}
            if a < len(self.initial_evals):
                rec.update(self.initial_evals[a].to_dict())
            lines.append(rec)
        by_iter: dict[int, list] = {}
        for a, seq in enumerate(self.steps):
            for s in seq:
                by_iter.setdefault(s.iteration, []).append((a, s))
        syncs = set(self.sync_iterations)
        for it in range(1, self.length + 1):
            for a, s in sorted(by_iter.get(it, []), key=lambda t: t[0]):
                lines.append({"kind": "step", "team": self.team, "agent": a, **s.to_dict()})
            best = self.team_best[it - 1]
            lines.append({"kind": "best", "team": self.team, "iteration": it, **best.to_dict()})
            if it in syncs:
                lines.append({"kind": "sync", "team": self.team, "iteration": it})
        lines.append({"kind": "end", "team": self.team, "iterations": self.length, "terminated": self.terminated})
        return "".join(json.dumps(rec, sort_keys=True, allow_nan=False) + "\n" for rec in lines)


def run_team(
    scenario: Scenario,
    config: AgentConfig,
    team_seed: int,
    team: int = 0,
) -> TeamTrace:
    n = scenario.team_size
    seeds = [agent_seed(team_seed, a) for a in range(n)]
    designs = [initial_state(scenario, [seeds[a], 0xD1], config.n_init) for a in range(n)]
    states = [AgentState() for _ in range(n)]
    trace = TeamTrace(
        scenario=scenario.name,
        variant=config.variant,
        team=team,
        team_seed=team_seed,
        agent_seeds=seeds,
        initial_designs=list(designs),
        steps=[[] for _ in range(n)],
        team_best=[],
        terminated=[None] * n,
        budget=scenario.iteration_budget,
        initial_evals=[evaluate(d, scenario) for d in designs],
    )
    for it in range(1, scenario.iteration_budget + 1):
        for a in range(n):
            if states[a].finished:
                continue
            designs[a], rec, states[a] = agent_step(designs[a], scenario, config, states[a], it, seeds[a])
            trace.steps[a].append(rec)
            if states[a].finished:
                trace.terminated[a] = it
        evals = [evaluate(d, scenario) for d in designs]
        trace.team_best.append(evals[best_index(evals)])
        if all(s.finished for s in states):
            break
        if n > 1 and it % scenario.interaction_interval == 0:
            # a shared design gives finished agents something new to work on
            designs = synchronize(designs, scenario)
            states = [replace(s, finished=False) for s in states]
            trace.terminated = [None] * n
            trace.sync_iterations.append(it)
    trace.final_designs = list(designs)
    return trace


# --- trace parsing ----------------------------------------------------------------


class TraceFormatError(ValueError):
    pass


def read_trace_records(text: str) -> list[dict]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"line {lineno}: {exc.msg}") from exc
    if not records or records[0].get("kind") != "header":
        raise TraceFormatError("trace does not start with a header record")
    if records[-1].get("kind") != "end":
        raise TraceFormatError("trace is truncated (no end record)")
    return records


@dataclass
class ReplayReport:
    ok: bool
    checked: int
    first_mismatch: int | None = None
    message: str = ""
    designs: list[TrussDesign] = field(default_factory=list)
    visited: list[TrussDesign] = field(default_factory=list)


def _close(a, b, tol=1e-9) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, bool) or isinstance(b, bool):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _matches(logged: dict, ev: EvaluationResult) -> bool:
    return (
        _close(logged.get("fos"), ev.fos)
        and _close(logged.get("mass"), ev.mass)
        and _close(logged.get("swr"), ev.swr)
        and logged.get("feasible") == ev.feasible
    )


def replay_trace(text: str, scenario: Scenario) -> ReplayReport:
    """Re-apply logged actions from the logged initial designs and recheck evaluations."""
    records = read_trace_records(text)
    designs: dict[int, TrussDesign] = {}
    visited: list[TrussDesign] = []
    checked = 0
    for rec in records:
        kind = rec.get("kind")
        if kind == "init":
            d = design_from_dict(rec["design"])
            designs[rec["agent"]] = d
            visited.append(d)
            if "fos" in rec and not _matches(rec, evaluate(d, scenario)):
                return ReplayReport(False, checked, 0, f"initial state of agent {rec['agent']} differs", visited=visited)
        elif kind == "step":
            a, it = rec["agent"], rec["iteration"]
            if rec.get("action") is not None:
                try:
                    designs[a] = apply(action_from_dict(rec["action"]), designs[a], scenario)
                except (ValueError, KeyError) as exc:
                    return ReplayReport(False, checked, it, f"agent {a}: {exc}", visited=visited)
                visited.append(designs[a])
            checked += 1
            if not _matches(rec, evaluate(designs[a], scenario)):
                return ReplayReport(False, checked, it, f"agent {a} evaluation mismatch at iteration {it}", visited=visited)
        elif kind == "best":
            evals = [evaluate(designs[a], scenario) for a in sorted(designs)]
            checked += 1
            if not _matches(rec, evals[best_index(evals)]):
                return ReplayReport(False, checked, rec["iteration"], f"team best mismatch at iteration {rec['iteration']}", visited=visited)
        elif kind == "sync":
            order = sorted(designs)
            synced = synchronize([designs[a] for a in order], scenario)
            designs = dict(zip(order, synced))
    return ReplayReport(True, checked, None, "ok", [designs[a] for a in sorted(designs)], visited)


# --- metrics --------------------------------------------------------------------


def team_best_from_records(records: list[dict]) -> list[dict]:
    return [r for r in records if r.get("kind") == "best"]


def cumulative_best_rswr(trace: TeamTrace | list[EvaluationResult], budget: int | None = None) -> list[float]:
    """Running max of feasible team-best SWR, zero before the first feasible design.

    With ``budget`` the series is padded to that length with its last value.
    """
    best = trace.team_best if isinstance(trace, TeamTrace) else trace
    if budget is None and isinstance(trace, TeamTrace):
        budget = trace.budget or len(best)
    out = []
    running = 0.0
    for e in best:
        if e is not None and e.feasible and e.swr is not None:
            running = max(running, e.swr)
        out.append(running)
    if budget is not None and len(out) < budget:
        out.extend([out[-1] if out else 0.0] * (budget - len(out)))
    return out


def mean_stderr(values) -> tuple[float, float]:
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _total_steps(trace: TeamTrace) -> int:
    return sum(1 for seq in trace.steps for s in seq if s.action is not None)


def aggregate(traces: list[TeamTrace]) -> dict:
    if not traces:
        raise ValueError("aggregate needs at least one trace")
    budget = max(t.budget or t.length for t in traces)
    series = np.array([cumulative_best_rswr(t, budget) for t in traces])
    n = len(traces)
    mean_series = series.mean(axis=0)
    if n > 1:
        se_series = series.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        se_series = np.zeros(budget)
    max_fos = [max((e.fos for e in t.team_best), default=0.0) for t in traces]
    max_rswr = [max((e.swr for e in t.team_best if e.feasible), default=0.0) for t in traces]
    final_fos = [t.team_best[-1].fos if t.team_best else 0.0 for t in traces]
    final_rswr = [s[-1] for s in series]
    steps = [_total_steps(t) for t in traces]

    def pair(vals):
        m, s = mean_stderr(vals)
        return {"mean": m, "stderr": s}

    return {
        "variant": traces[0].variant,
        "scenario": traces[0].scenario,
        "teams": n,
        "budget": budget,
        "cumulative_best_rswr": {"mean": mean_series.tolist(), "stderr": se_series.tolist()},
        "final_cumulative_best_rswr": pair(final_rswr),
        "max_fos": pair(max_fos),
        "max_rswr": pair(max_rswr),
        "final_fos": pair(final_fos),
        "total_steps": pair(steps),
        "first_feasible_iteration": pair(
            [next((i + 1 for i, e in enumerate(t.team_best) if e.feasible), budget + 1) for t in traces]
        ),
    }
