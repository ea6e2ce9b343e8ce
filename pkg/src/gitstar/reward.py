"""Planner performance metrics, the reward scoring rules and the fitness of a G-heuristic."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path as FsPath
from typing import Any, Iterable, Sequence

import numpy as np

from .gp import ExprIndividual
from .planner import KeyMode, PlannerConfig, PlanResult, plan
from .world import ContractError, ProblemInstance, generate_scenario

log = logging.getLogger(__name__)

METRICS = (
    "t_init_min",
    "t_init_med",
    "t_init_max",
    "c_init_min",
    "c_init_med",
    "c_init_max",
    "c_final_min",
    "c_final_med",
    "c_final_max",
    "success",
)
DEFAULT_WEIGHTS = (1.0, 3.5, 0.5, 1.0, 2.5, 1.0, 1.0, 2.5, 1.0, 3.0)
HIGHER_IS_BETTER = frozenset({"success"})


@dataclass(frozen=True)
class RunMetrics:
    t_init_min: float
    t_init_med: float
    t_init_max: float
    c_init_min: float
    c_init_med: float
    c_init_max: float
    c_final_min: float
    c_final_med: float
    c_final_max: float
    success: float
    runs: int = 1

    def __post_init__(self) -> None:
        for name in ("t_init", "c_init", "c_final"):
            lo, med, hi = (getattr(self, f"{name}_{s}") for s in ("min", "med", "max"))
            if not lo <= med <= hi:
                raise ContractError(f"{name}: expected min <= med <= max, got {lo}, {med}, {hi}")
        if not 0.0 <= self.success <= 1.0:
            raise ContractError("success must be a fraction")

    @classmethod
    def from_samples(
        cls, t_init: Sequence[float], c_init: Sequence[float], c_final: Sequence[float], success: Sequence[bool]
    ) -> "RunMetrics":
        """Aggregate per-run values; failed runs carry inf."""
        if len(success) == 0:
            raise ContractError("need at least one run")
        out: dict[str, float] = {}
        for name, vals in (("t_init", t_init), ("c_init", c_init), ("c_final", c_final)):
            arr = np.asarray(vals, dtype=float)
            out[f"{name}_min"] = float(arr.min())
            out[f"{name}_med"] = float(np.median(arr))
            out[f"{name}_max"] = float(arr.max())
        return cls(**out, success=float(np.mean(success)), runs=len(success))

    @classmethod
    def from_results(cls, results: Sequence[PlanResult]) -> "RunMetrics":
        return cls.from_samples(
            [r.t_init for r in results],
            [r.c_init for r in results],
            [r.c_final for r in results],
            [r.success for r in results],
        )

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, m) for m in METRICS)

    def to_dict(self) -> dict[str, Any]:
        return {k: (v if not isinstance(v, float) or math.isfinite(v) else "inf") for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RunMetrics":
        return cls(**{k: (math.inf if v == "inf" else v) for k, v in doc.items()})


@dataclass(frozen=True)
class RewardConfig:
    initial_score: float = 800.0
    delta: float = 10.0
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    bonus_low: float = 0.05
    bonus_high: float = 0.15
    c1: float = 0.1
    c2: float = 1.0
    abort_margin: float = 1.5
    literal_base: bool = False  # score with delta + delta * alpha (signed alpha) instead
    total_floor: float = -790.0
    eps_den: float = 1e-9

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ContractError("delta must be positive")
        if len(self.weights) != len(METRICS) or min(self.weights) < 0:
            raise ContractError(f"need {len(METRICS)} non-negative weights")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))


def base_score(
    v_git: float,
    v_eit: float,
    lower_is_better: bool = True,
    delta: float = 10.0,
    literal: bool = False,
    eps_den: float = 1e-9,
) -> float:
    """Per-metric score; negative when the candidate beats the baseline."""
    if delta <= 0:
        raise ContractError("delta must be positive")
    git_inf, eit_inf = math.isinf(v_git), math.isinf(v_eit)
    if git_inf and eit_inf:
        return 0.0
    if git_inf or eit_inf:
        # the finite side wins when lower is better, loses otherwise
        git_wins = eit_inf if lower_is_better else git_inf
        return -2.0 * delta if git_wins else 2.0 * delta
    den = abs(v_eit) if v_eit != 0 else eps_den
    if literal:
        return delta + delta * (v_git - v_eit) / den
    alpha = abs(v_git - v_eit) / den
    superior = v_git < v_eit if lower_is_better else v_git > v_eit
    sign = -1.0 if superior else 1.0
    return sign * delta * (1.0 + alpha)


def success_bonus(succ_git: float, succ_eit: float, delta: float = 10.0, low: float = 0.05, high: float = 0.15) -> float:
    d = round(succ_git - succ_eit, 12)  # rates are run fractions; drop float noise at the thresholds
    if d >= high:
        return -2.0 * delta
    if d > low:
        return -delta
    return 0.0


def total_score(git: RunMetrics, eit: RunMetrics, cfg: RewardConfig = RewardConfig()) -> float:
    total = 0.0
    for name, w in zip(METRICS, cfg.weights):
        vg, ve = getattr(git, name), getattr(eit, name)
        s = base_score(vg, ve, name not in HIGHER_IS_BETTER, cfg.delta, cfg.literal_base, cfg.eps_den)
        if name == "success":
            s += success_bonus(vg, ve, cfg.delta, cfg.bonus_low, cfg.bonus_high)
        total += s * w
    return total


def fitness(totals: Sequence[float], size: int, cfg: RewardConfig = RewardConfig()) -> float:
    """rho = initial + mean + c1 * population variance + c2 * |psi| (lower is better)."""
    arr = np.asarray(totals, dtype=float)
    if arr.size == 0:
        raise ContractError("fitness needs at least one total")
    if (arr < cfg.total_floor).any():
        log.info("clamping %d total score(s) at %s", int((arr < cfg.total_floor).sum()), cfg.total_floor)
        arr = np.maximum(arr, cfg.total_floor)
    return float(cfg.initial_score + arr.mean() + cfg.c1 * arr.var() + cfg.c2 * size)


# --------------------------------------------------------------------------- benchmarks


@dataclass(frozen=True)
class BenchmarkProblem:
    scenario: str
    dimension: int
    seed: int
    runs: int = 10
    batch_budget: int | None = None
    time_limit: float | None = None
    params: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ContractError("runs must be at least 1")
        if (self.batch_budget is None) == (self.time_limit is None):
            raise ContractError("give exactly one of batch_budget and time_limit_s")

    @property
    def instance(self) -> ProblemInstance:
        return generate_scenario(self.scenario, self.dimension, self.seed, self.params)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"scenario": self.scenario, "dimension": self.dimension, "seed": self.seed, "runs": self.runs}
        if self.batch_budget is not None:
            doc["batch_budget"] = self.batch_budget
        else:
            doc["time_limit_s"] = self.time_limit
        if self.params:
            doc["params"] = self.params
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "BenchmarkProblem":
        return cls(
            scenario=doc["scenario"],
            dimension=int(doc["dimension"]),
            seed=int(doc.get("seed", 0)),
            runs=int(doc.get("runs", 10)),
            batch_budget=doc.get("batch_budget"),
            time_limit=doc.get("time_limit_s"),
            params=doc.get("params"),
        )


@dataclass(frozen=True)
class BenchmarkSet:
    problems: tuple[BenchmarkProblem, ...]
    segments: tuple[tuple[int, ...], ...] = ()
    seed_base: int = 0

    def __post_init__(self) -> None:
        if not self.problems:
            raise ContractError("a benchmark needs at least one problem")
        segs = self.segments or (tuple(range(len(self.problems))),)
        flat = sorted(i for seg in segs for i in seg)
        if flat != list(range(len(self.problems))) or any(not seg for seg in segs):
            raise ContractError("segments must cover every problem exactly once")
        object.__setattr__(self, "segments", tuple(tuple(seg) for seg in segs))

    def to_dict(self) -> dict[str, Any]:
        return {
            "problems": [p.to_dict() for p in self.problems],
            "segments": [list(s) for s in self.segments],
            "seed_base": self.seed_base,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "BenchmarkSet":
        return cls(
            problems=tuple(BenchmarkProblem.from_dict(p) for p in doc["problems"]),
            segments=tuple(tuple(s) for s in doc.get("segments", ())),
            seed_base=int(doc.get("seed_base", 0)),
        )

    @classmethod
    def load(cls, path: str | FsPath) -> "BenchmarkSet":
        return cls.from_dict(json.loads(FsPath(path).read_text()))

    def digest(self, planner: PlannerConfig | None = None) -> str:
        doc = self.to_dict()
        if planner is not None:
            doc["planner"] = {"batch_size": planner.batch_size, "apf": asdict(planner.apf)}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def run_config(problem: BenchmarkProblem, base: PlannerConfig | None = None, **overrides: Any) -> PlannerConfig:
    base = base or PlannerConfig()
    return replace(base, batch_budget=problem.batch_budget, time_limit=problem.time_limit, **overrides)


def evaluate_planner(
    problem: ProblemInstance,
    config: PlannerConfig,
    runs: int,
    seed_base: int = 0,
) -> tuple[RunMetrics, list[PlanResult]]:
    """Run ``plan`` with seeds ``seed_base .. seed_base + runs - 1`` and aggregate."""
    if runs < 1:
        raise ContractError("runs must be at least 1")
    results = [plan(problem, config, np.random.default_rng(seed_base + i)) for i in range(runs)]
    return RunMetrics.from_results(results), results


def heuristic_config(ind: ExprIndividual | None, base: PlannerConfig | None = None) -> PlannerConfig:
    base = base or PlannerConfig()
    if ind is None:
        return replace(base, key_mode=KeyMode.BASELINE, heuristic=None)
    return replace(base, key_mode=KeyMode.FILE, heuristic=ind)


@dataclass
class BaselineCache:
    """Control-group metrics per benchmark problem, optionally persisted as JSON."""

    metrics: dict[int, RunMetrics] = field(default_factory=dict)
    path: FsPath | None = None
    digest: str = ""

    @classmethod
    def build(
        cls,
        bench: BenchmarkSet,
        planner: PlannerConfig | None = None,
        path: str | FsPath | None = None,
    ) -> "BaselineCache":
        planner = planner or PlannerConfig()
        digest = bench.digest(planner)
        path = FsPath(path) if path is not None else None
        if path is not None and path.exists():
            doc = json.loads(path.read_text())
            if doc.get("digest") == digest:
                return cls({int(k): RunMetrics.from_dict(v) for k, v in doc["metrics"].items()}, path, digest)
        cache = cls({}, path, digest)
        for i, prob in enumerate(bench.problems):
            cfg = heuristic_config(None, run_config(prob, planner))
            cache.metrics[i], _ = evaluate_planner(prob.instance, cfg, prob.runs, bench.seed_base)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            doc = {"digest": digest, "metrics": {str(k): v.to_dict() for k, v in cache.metrics.items()}}
            path.write_text(json.dumps(doc, indent=1))
        return cache


@dataclass(frozen=True)
class Evaluation:
    rho: float
    totals: tuple[float, ...]
    aborted: bool
    segments_run: int


def segmented_evaluate(
    ind: ExprIndividual,
    bench: BenchmarkSet,
    baseline: BaselineCache,
    cfg: RewardConfig = RewardConfig(),
    planner: PlannerConfig | None = None,
) -> Evaluation:
    """Fitness of ``ind``, evaluated segment by segment with early abort.

    After each segment the mean total so far is compared with the mean total a
    baseline-identical individual would get on the same problems. Once it is
    worse by more than ``abort_margin - 1`` times the magnitude of that tie
    total, the partial fitness stands in for the whole benchmark.
    """
    totals: list[float] = []
    ties: list[float] = []
    for k, seg in enumerate(bench.segments, start=1):
        for i in seg:
            prob = bench.problems[i]
            run_cfg = heuristic_config(ind, run_config(prob, planner))
            metrics, _ = evaluate_planner(prob.instance, run_cfg, prob.runs, bench.seed_base)
            totals.append(total_score(metrics, baseline.metrics[i], cfg))
            ties.append(total_score(baseline.metrics[i], baseline.metrics[i], cfg))
        gap, tie = float(np.mean(totals) - np.mean(ties)), float(np.mean(ties))
        if k < len(bench.segments) and gap > (cfg.abort_margin - 1.0) * abs(tie):
            return Evaluation(fitness(totals, ind.size, cfg), tuple(totals), True, k)
    return Evaluation(fitness(totals, ind.size, cfg), tuple(totals), False, len(bench.segments))


def table_row(values: Iterable[float]) -> RunMetrics:
    """Build metrics from a ten-value row in ``METRICS`` order."""
    vals = list(values)
    if len(vals) != len(METRICS):
        raise ContractError(f"expected {len(METRICS)} values")
    return RunMetrics(**dict(zip(METRICS, vals)))
