"""Goal-directed design agents for sequential 2-D truss design.

The package couples a direct-stiffness truss solver, a six-action design
grammar, a raster/heatmap layer and four selection policies (vanilla,
temporal, goal, combination) that run in small synchronizing teams.
"""

from .actions import (
    AddMember,
    AddNode,
    CandidateAction,
    DecreaseThickness,
    DeleteMember,
    DeleteNode,
    IncreaseThickness,
    apply,
    is_applicable,
)
from .agents import VARIANTS, AgentConfig, SelectionWeights, agent_step
from .fea import EvaluationResult, analyze, evaluate, factor_of_safety, objective_rank
from .model import (
    Node,
    Member,
    Point2D,
    Scenario,
    TrussDesign,
    constrained_scenario,
    unconstrained_scenario,
    validate_design,
)
from .team import aggregate, replay_trace, run_team
from .visual import Heatmap, infer_candidates, render, ssim, synth_heatmap

__version__ = "0.1.0"

__all__ = [
    "AddMember",
    "AddNode",
    "AgentConfig",
    "CandidateAction",
    "DecreaseThickness",
    "DeleteMember",
    "DeleteNode",
    "EvaluationResult",
    "Heatmap",
    "IncreaseThickness",
    "Member",
    "Node",
    "Point2D",
    "Scenario",
    "SelectionWeights",
    "TrussDesign",
    "VARIANTS",
    "agent_step",
    "aggregate",
    "analyze",
    "apply",
    "constrained_scenario",
    "evaluate",
    "factor_of_safety",
    "infer_candidates",
    "is_applicable",
    "objective_rank",
    "render",
    "replay_trace",
    "run_team",
    "ssim",
    "synth_heatmap",
    "unconstrained_scenario",
    "validate_design",
]
