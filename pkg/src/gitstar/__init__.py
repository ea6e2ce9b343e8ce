"""GIT*: an anytime batch-informed planner whose edge-ordering key is evolved
with reinforced genetic programming."""

from .gp import BASELINE, WINNER, EdgeContext, ExprIndividual, ExprTree
from .planner import GITStar, KeyMode, PlannerConfig, PlanResult, plan
from .reward import BenchmarkSet, RewardConfig, RunMetrics
from .training import GPParams, train_rgp
from .world import ProblemInstance, Scenario, generate_scenario, obstacle_free

__all__ = [
    "BASELINE",
    "BenchmarkSet",
    "GPParams",
    "RewardConfig",
    "RunMetrics",
    "train_rgp",
    "WINNER",
    "EdgeContext",
    "ExprIndividual",
    "ExprTree",
    "GITStar",
    "KeyMode",
    "PlannerConfig",
    "PlanResult",
    "plan",
    "ProblemInstance",
    "Scenario",
    "generate_scenario",
    "obstacle_free",
]

__version__ = "0.1.0"
