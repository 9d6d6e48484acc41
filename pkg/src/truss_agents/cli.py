"""Command-line harness: run experiments, evaluate and render designs, replay traces."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .agents import VARIANTS, AgentConfig, SelectionWeights
from .fea import evaluate, rank_key
from .model import (
    ParseError,
    Scenario,
    constrained_scenario,
    deserialize_design,
    deserialize_scenario,
    serialize_scenario,
    unconstrained_scenario,
    validate_design,
)
from .team import (
    TeamTrace,
    TraceFormatError,
    aggregate,
    cumulative_best_rswr,
    read_trace_records,
    replay_trace,
    run_team,
)
from .visual import render, to_pgm_bytes

EXIT_OK, EXIT_PARSE, EXIT_IO, EXIT_VALIDATION, EXIT_MISMATCH = 0, 1, 2, 3, 4
THREADS_ENV = "TRUSS_AGENTS_THREADS"
BUILTIN_SCENARIOS = {"unconstrained": unconstrained_scenario, "constrained": constrained_scenario}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class ExperimentConfig:
    scenario: str = "unconstrained"
    variants: tuple[str, ...] = VARIANTS
    teams: int = 16
    base_seed: int = 0
    out: str = "runs"
    threads: int = 1
    weights: SelectionWeights = field(default_factory=SelectionWeights)
    burst_length: int = 5
    n_init: int = 4

    def __post_init__(self):
        if self.teams < 1:
            raise ValueError("teams must be at least 1")
        if not self.variants:
            raise ValueError("at least one variant is required")
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown:
            raise ValueError(f"unknown variants {unknown}; expected a subset of {list(VARIANTS)}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def agent_config(self, variant: str) -> AgentConfig:
        return AgentConfig(variant=variant, weights=self.weights, burst_length=self.burst_length, n_init=self.n_init)


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError(f"{what} file not found: {path}", EXIT_PARSE) from None
    except OSError as exc:
        raise CliError(f"cannot read {what} file {path}: {exc}", EXIT_IO) from exc


def load_scenario(spec: str) -> Scenario:
    """A built-in scenario name or a path to a scenario JSON file."""
    if spec in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[spec]()
    try:
        return deserialize_scenario(_read_text(spec, "scenario"))
    except ParseError as exc:
        raise CliError(f"{spec}: {exc}", EXIT_PARSE) from exc


def load_design(path: str):
    try:
        return deserialize_design(_read_text(path, "design"))
    except ParseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from exc


def _parse_variants(text) -> tuple[str, ...]:
    if isinstance(text, str):
        items = [v.strip() for v in text.split(",")]
    else:
        items = list(text)
    return tuple(v for v in items if v)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(_read_text(args.config, "config"))
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}", EXIT_PARSE) from exc
        if not isinstance(raw, dict):
            raise CliError(f"{args.config}: config must be a JSON object", EXIT_PARSE)
    kw: dict = {}
    try:
        for key in ("scenario", "out"):
            if key in raw:
                kw[key] = str(raw[key])
        for key in ("teams", "base_seed", "threads", "burst_length", "n_init"):
            if key in raw:
                kw[key] = int(raw[key])
        if "variants" in raw:
            kw["variants"] = _parse_variants(raw["variants"])
        if "weights" in raw:
            kw["weights"] = SelectionWeights(**{k: float(v) for k, v in raw["weights"].items()})
        unknown = set(raw) - {"scenario", "out", "teams", "base_seed", "threads", "burst_length", "n_init", "variants", "weights"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        # command-line flags win over the file, the environment wins over both for threads
        if args.scenario is not None:
            kw["scenario"] = args.scenario
        if args.out is not None:
            kw["out"] = args.out
        if args.seed is not None:
            kw["base_seed"] = args.seed
        if args.teams is not None:
            kw["teams"] = args.teams
        if args.variants is not None:
            kw["variants"] = _parse_variants(args.variants)
        if args.threads is not None:
            kw["threads"] = args.threads
        if os.environ.get(THREADS_ENV):
            kw["threads"] = int(os.environ[THREADS_ENV])
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad experiment config: {exc}", EXIT_PARSE) from exc


def _run_job(job):
    scenario, agent_config, seed, team = job
    return run_team(scenario, agent_config, seed, team)


def series_csv(traces_by_variant: dict[str, list[TeamTrace]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "team", "iteration", "cumulative_best_rswr"])
    for variant, traces in traces_by_variant.items():
        for tr in traces:
            for it, value in enumerate(cumulative_best_rswr(tr), start=1):
                w.writerow([variant, tr.team, it, repr(float(value))])
    return buf.getvalue()


def run_experiment(config: ExperimentConfig, scenario: Scenario) -> dict[str, list[TeamTrace]]:
    jobs = [
        (scenario, config.agent_config(v), config.base_seed + t, t)
        for v in config.variants
        for t in range(config.teams)
    ]
    if config.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            traces = list(pool.map(_run_job, jobs))
    else:
        traces = [_run_job(j) for j in jobs]
    out: dict[str, list[TeamTrace]] = {v: [] for v in config.variants}
    for (_, ac, _, _), tr in zip(jobs, traces):
        out[ac.variant].append(tr)
    return out


def _best_final_design(trace: TeamTrace, scenario: Scenario):
    return max(trace.final_designs, key=lambda d: rank_key(evaluate(d, scenario)))


def write_outputs(out_dir: Path, scenario: Scenario, results: dict[str, list[TeamTrace]]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scenario.json").write_text(serialize_scenario(scenario) + "\n", encoding="utf-8")
    for variant, traces in results.items():
        tdir = out_dir / "traces" / variant
        sdir = out_dir / "snapshots" / variant
        tdir.mkdir(parents=True, exist_ok=True)
        sdir.mkdir(parents=True, exist_ok=True)
        for tr in traces:
            (tdir / f"team_{tr.team:02d}.jsonl").write_text(tr.to_jsonl(), encoding="utf-8")
            (sdir / f"team_{tr.team:02d}.pgm").write_bytes(to_pgm_bytes(render(_best_final_design(tr, scenario), scenario)))
        report = json.dumps(aggregate(traces), sort_keys=True, indent=1, allow_nan=False)
        (out_dir / f"report_{variant}.json").write_text(report + "\n", encoding="utf-8")
    (out_dir / "cumulative_best_rswr.csv").write_text(series_csv(results), encoding="utf-8")


def cmd_run(args) -> int:
    config = build_config(args)
    scenario = load_scenario(config.scenario)
    results = run_experiment(config, scenario)
    try:
        write_outputs(Path(config.out), scenario, results)
    except OSError as exc:
        raise CliError(f"cannot write outputs to {config.out}: {exc}", EXIT_IO) from exc
    for variant, traces in results.items():
        final = aggregate(traces)["final_cumulative_best_rswr"]
        print(f"{variant}: final cumulative-best RSWR {final['mean']:.6g} +/- {final['stderr']:.3g} ({len(traces)} teams)")
    return EXIT_OK


def _require(value, flag: str):
    if value is None:
        raise CliError(f"{flag} is required", EXIT_PARSE)
    return value


def cmd_evaluate(args) -> int:
    scenario = load_scenario(_require(args.scenario, "--scenario"))
    design = load_design(_require(args.design, "--design"))
    violations = validate_design(design, scenario)
    if violations:
        for v in violations:
            print(f"violation: {v.kind} {v.detail}".rstrip(), file=sys.stderr)
        return EXIT_VALIDATION
    print(json.dumps(evaluate(design, scenario).to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_render(args) -> int:
    scenario = load_scenario(_require(args.scenario, "--scenario"))
    design = load_design(_require(args.design, "--design"))
    out = _require(args.out, "--out")
    try:
        Path(out).write_bytes(to_pgm_bytes(render(design, scenario)))
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc
    return EXIT_OK


def cmd_replay(args) -> int:
    text = _read_text(args.trace, "trace")
    try:
        header = read_trace_records(text)[0]
    except TraceFormatError as exc:
        raise CliError(f"{args.trace}: {exc}", EXIT_PARSE) from exc
    if args.scenario is not None:
        scenario = load_scenario(args.scenario)
    elif header.get("scenario") in BUILTIN_SCENARIOS:
        scenario = BUILTIN_SCENARIOS[header["scenario"]]()
    else:
        raise CliError("--scenario is required for traces of custom scenarios", EXIT_PARSE)
    try:
        report = replay_trace(text, scenario)
    except (TraceFormatError, KeyError, TypeError) as exc:
        raise CliError(f"{args.trace}: malformed trace: {exc}", EXIT_PARSE) from exc
    if not report.ok:
        print(f"mismatch at iteration {report.first_mismatch}: {report.message}", file=sys.stderr)
        return EXIT_MISMATCH
    print(f"ok: {report.checked} records verified")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truss-agents", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run seeded multi-team experiments")
    run.add_argument("--config", help="experiment config JSON")
    run.add_argument("--scenario", help="scenario JSON path or built-in name (unconstrained, constrained)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--seed", type=int, help="base seed; team t uses seed + t")
    run.add_argument("--teams", type=int)
    run.add_argument("--variants", help="comma-separated subset of " + ",".join(VARIANTS))
    run.add_argument("--threads", type=int, help=f"worker processes (overridden by {THREADS_ENV})")
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("evaluate", help="print FOS, mass, SWR and feasibility of a design")
    ev.add_argument("--design")
    ev.add_argument("--scenario")
    ev.set_defaults(func=cmd_evaluate)

    rd = sub.add_parser("render", help="write the 128x128 raster of a design as binary PGM")
    rd.add_argument("--design")
    rd.add_argument("--scenario")
    rd.add_argument("--out")
    rd.set_defaults(func=cmd_render)

    rp = sub.add_parser("replay", help="re-apply a trace and check every logged evaluation")
    rp.add_argument("trace")
    rp.add_argument("--scenario")
    rp.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; that code is reserved for I/O here
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
