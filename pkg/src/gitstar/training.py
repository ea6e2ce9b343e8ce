"""Reward-driven genetic programming loop that evolves G-heuristics."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath
from typing import Callable, Sequence

import numpy as np

from .gp import (
    BASELINE,
    MAX_DEPTH,
    ExprIndividual,
    init_population,
    point_mutate,
    save_heuristic,
    subtree_crossover,
    tournament_select,
)
from .planner import PlannerConfig
from .reward import BaselineCache, BenchmarkSet, Evaluation, RewardConfig, segmented_evaluate
from .world import ContractError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GPParams:
    population: int = 1500
    generations: int = 100
    p_c: float = 0.8
    p_m: float = 0.1
    tournament: int = 5
    max_depth: int = MAX_DEPTH
    node_rate: float = 0.2  # per-node replacement rate once a child is picked for mutation
    elitism: int = 1

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ContractError("population must be at least 2")
        if self.generations < 1:
            raise ContractError("generations must be at least 1")
        if not (0 <= self.p_c <= 1 and 0 <= self.p_m <= 1 and 0 <= self.node_rate <= 1):
            raise ContractError("rates must lie in [0, 1]")
        if self.tournament < 1 or not 0 <= self.elitism < self.population:
            raise ContractError("bad tournament size or elitism")
        if not 1 <= self.max_depth <= MAX_DEPTH:
            raise ContractError(f"max_depth must be in 1..{MAX_DEPTH}")

    @classmethod
    def desk(cls, **overrides) -> "GPParams":
        return cls(**{"population": 30, "generations": 8, **overrides})


@dataclass(frozen=True)
class GenerationStats:
    gen: int
    min_rho: float
    mean_rho: float
    max_rho: float
    best_so_far: float
    aborted: int


@dataclass
class TrainResult:
    best: ExprIndividual
    history: list[GenerationStats] = field(default_factory=list)
    evaluations: int = 0

    @property
    def best_rho(self) -> float:
        return float(self.best.fitness)


def _evaluate_one(args: tuple[str, BenchmarkSet, BaselineCache, RewardConfig, PlannerConfig | None]) -> Evaluation:
    text, bench, baseline, cfg, planner = args
    return segmented_evaluate(ExprIndividual.from_text(text), bench, baseline, cfg, planner)


class FitnessCache:
    """Fitness per individual signature; re-evaluation is deterministic, so it is skipped."""

    def __init__(
        self,
        bench: BenchmarkSet,
        baseline: BaselineCache,
        cfg: RewardConfig,
        planner: PlannerConfig | None = None,
        jobs: int = 1,
    ):
        self.bench, self.baseline, self.cfg, self.planner = bench, baseline, cfg, planner
        self.jobs = max(1, jobs)
        self.results: dict[str, Evaluation] = {}

    def evaluate(self, pop: Sequence[ExprIndividual]) -> list[ExprIndividual]:
        pending: dict[str, ExprIndividual] = {}
        for ind in pop:
            sig = ind.signature
            if sig not in self.results:
                pending.setdefault(sig, ind)
        args = [(ind.to_text(), self.bench, self.baseline, self.cfg, self.planner) for ind in pending.values()]
        if self.jobs > 1 and len(args) > 1:
            with ProcessPoolExecutor(self.jobs) as pool:
                evals = list(pool.map(_evaluate_one, args))
        else:
            evals = [_evaluate_one(a) for a in args]
        self.results.update(zip(pending, evals))
        return [ind.with_fitness(self.results[ind.signature].rho) for ind in pop]

    def __len__(self) -> int:
        return len(self.results)


def next_generation(
    pop: Sequence[ExprIndividual], params: GPParams, rng: np.random.Generator
) -> list[ExprIndividual]:
    """Elites first, then select / crossover / maybe-mutate children."""
    ranked = sorted(pop, key=lambda ind: (ind.fitness, ind.size))
    out = list(ranked[: params.elitism])
    while len(out) < params.population:
        p1 = tournament_select(pop, params.tournament, rng)
        p2 = tournament_select(pop, params.tournament, rng)
        child = subtree_crossover(p1, p2, params.p_c, rng, params.max_depth)
        if rng.random() < params.p_m:
            child = point_mutate(child, params.node_rate, rng)
        out.append(replace(child, fitness=None))
    return out


def train_rgp(
    bench: BenchmarkSet,
    params: GPParams = GPParams(),
    cfg: RewardConfig = RewardConfig(),
    rng: np.random.Generator | int | None = None,
    planner: PlannerConfig | None = None,
    inject: Sequence[ExprIndividual] = (),
    baseline_path: str | FsPath | None = None,
    jobs: int = 1,
    progress: Callable[[GenerationStats], None] | None = None,
) -> TrainResult:
    """Evolve a key expression pair; returns the lowest-fitness individual seen."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if len(inject) > params.population:
        raise ContractError("more injected individuals than population slots")
    baseline = BaselineCache.build(bench, planner, baseline_path)
    cache = FitnessCache(bench, baseline, cfg, planner, jobs)
    pop = init_population(params.population, rng, max_depth=params.max_depth)
    pop[: len(inject)] = [replace(ind, fitness=None) for ind in inject]
    result: TrainResult | None = None
    for gen in range(params.generations):
        pop = cache.evaluate(pop)
        rhos = np.array([ind.fitness for ind in pop])
        best = min(pop, key=lambda ind: (ind.fitness, ind.size))
        if result is None or best.fitness < result.best.fitness:
            result = TrainResult(best, result.history if result else [])
        aborted = sum(cache.results[ind.signature].aborted for ind in pop)
        stats = GenerationStats(gen, float(rhos.min()), float(rhos.mean()), float(rhos.max()), result.best_rho, aborted)
        result.history.append(stats)
        log.info("gen %d: min %.3f mean %.3f max %.3f", gen, stats.min_rho, stats.mean_rho, stats.max_rho)
        if progress is not None:
            progress(stats)
        if gen + 1 < params.generations:
            pop = next_generation(pop, params, rng)
    assert result is not None
    result.evaluations = len(cache)
    return result


def baseline_equivalent_rho(
    bench: BenchmarkSet, cfg: RewardConfig = RewardConfig(), planner: PlannerConfig | None = None,
    baseline_path: str | FsPath | None = None,
) -> float:
    """Fitness of the linear Euclidean-plus-effort key scored against itself."""
    baseline = BaselineCache.build(bench, planner, baseline_path)
    return segmented_evaluate(BASELINE, bench, baseline, cfg, planner).rho


def write_outputs(result: TrainResult, out_dir: str | FsPath) -> tuple[FsPath, FsPath]:
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gens = out / "generations.csv"
    with gens.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gen", "min_rho", "mean_rho", "max_rho", "best_so_far"])
        for s in result.history:
            w.writerow([s.gen, repr(s.min_rho), repr(s.mean_rho), repr(s.max_rho), repr(s.best_so_far)])
    winner = out / "winner.heuristic"
    save_heuristic(result.best, winner)
    if not math.isfinite(result.best_rho):
        log.warning("winner fitness is not finite")
    return gens, winner
