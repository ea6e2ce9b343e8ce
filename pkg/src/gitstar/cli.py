"""Command-line interface: worldgen, plan, bench and train."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any, Sequence

import numpy as np

from .gp import CONSTANT, ExprIndividual, StructureError, load_heuristic
from .planner import KeyMode, PlannerConfig, plan
from .reward import METRICS, BenchmarkProblem, BenchmarkSet, RewardConfig, RunMetrics
from .training import GPParams, train_rgp, write_outputs
from .world import ContractError, GenerationError, ProblemInstance, generate_scenario

log = logging.getLogger("gitstar")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4
CSV_COLUMNS = ("planner", "problem") + METRICS


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def default_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("GITSTAR_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"GITSTAR_SEED must be an integer, got {env!r}") from None


def fmt(x: float | None) -> str:
    """CSV rendering; infinity becomes the literal ``inf``."""
    if x is None or (isinstance(x, float) and math.isinf(x)):
        return "inf"
    return repr(float(x)) if isinstance(x, float) else str(x)


def read_json(path: str) -> Any:
    try:
        return json.loads(FsPath(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def parse_key(spec: str) -> tuple[str, KeyMode, ExprIndividual | None]:
    """``git`` / ``baseline`` / ``file:PATH`` -> (label, mode, heuristic)."""
    if spec in ("git", "baseline"):
        return spec, KeyMode(spec), None
    if spec.startswith("file:"):
        path = spec[len("file:") :]
        try:
            return FsPath(path).stem, KeyMode.FILE, load_heuristic(path)
        except (OSError, StructureError) as exc:
            raise InputError(f"cannot load heuristic {path}: {exc}") from exc
    raise UsageError(f"unknown key {spec!r}; use git, baseline or file:PATH")


def planner_config(key: KeyMode, heuristic: ExprIndividual | None, time_limit: float | None, batch_budget: int | None) -> PlannerConfig:
    return PlannerConfig(key_mode=key, heuristic=heuristic, time_limit=time_limit, batch_budget=batch_budget)


# --------------------------------------------------------------------------- worldgen


def cmd_worldgen(args: argparse.Namespace) -> int:
    params = None
    if args.params:
        params = read_json(args.params) if FsPath(args.params).exists() else json.loads(args.params)
    try:
        problem = generate_scenario(args.kind, args.dim, default_seed(args.seed), params)
    except (ContractError, GenerationError) as exc:
        raise UsageError(str(exc)) from exc
    text = problem.to_json(indent=1) + "\n"
    if args.out:
        FsPath(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------- plan


def load_problem(path: str) -> ProblemInstance:
    try:
        return ProblemInstance.from_dict(read_json(path))
    except (KeyError, TypeError, ContractError) as exc:
        raise InputError(f"{path} is not a problem file: {exc}") from exc


def cmd_plan(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    label, mode, heuristic = parse_key(args.key)
    seed = default_seed(args.seed)
    cfg = planner_config(mode, heuristic, args.time_limit, args.batch_budget)
    result = plan(problem, cfg, np.random.default_rng(seed))
    record = {"planner": label, "problem": problem.name, **result.to_record(seed)}
    line = json.dumps(record, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "a") as fh:
            fh.write(line)
    else:
        sys.stdout.write(line)
    if args.path_out and result.path is not None:
        np.savetxt(args.path_out, result.path.states)
    print(
        f"t_init={fmt(result.t_init)} c_init={fmt(result.c_init)} "
        f"c_final={fmt(result.c_final)} success={int(result.success)}",
        file=sys.stderr if not args.out else sys.stdout,
    )
    return EXIT_OK


# --------------------------------------------------------------------------- bench


@dataclass(frozen=True)
class RunTask:
    planner: str
    mode: str
    heuristic: str | None
    problem_index: int
    problem: dict[str, Any]
    seed: int


def run_task(task: RunTask) -> dict[str, Any]:
    prob = BenchmarkProblem.from_dict(task.problem)
    heuristic = ExprIndividual.from_text(task.heuristic) if task.heuristic else None
    cfg = planner_config(KeyMode(task.mode), heuristic, prob.time_limit, prob.batch_budget)
    head = {"planner": task.planner, "problem": problem_label(task.problem_index, prob.instance)}
    try:
        result = plan(prob.instance, cfg, np.random.default_rng(task.seed))
    except Exception as exc:  # recorded as a failed run, reported as a warning
        return {**head, "seed": task.seed, "t_init": None, "c_init": None, "c_final": None,
                "improvements": [], "success": False, "error": repr(exc)}
    return {**head, **result.to_record(task.seed)}


def problem_label(index: int, problem: ProblemInstance) -> str:
    return f"{index}:{problem.name}"


def records_to_metrics(records: Sequence[dict[str, Any]]) -> RunMetrics:
    val = lambda r, k: math.inf if r[k] is None else float(r[k])  # noqa: E731
    return RunMetrics.from_samples(
        [val(r, "t_init") for r in records],
        [val(r, "c_init") for r in records],
        [val(r, "c_final") for r in records],
        [bool(r["success"]) for r in records],
    )


def improvement_pct(baseline: float, other: float) -> float:
    """Median reduction relative to the baseline, in percent (positive is better)."""
    if math.isinf(baseline) and math.isinf(other):
        return 0.0
    if math.isinf(baseline):
        return 100.0
    if math.isinf(other) or baseline == 0:
        return -math.inf if other > baseline else 0.0
    return 100.0 * (baseline - other) / baseline


def cmd_bench(args: argparse.Namespace) -> int:
    bench = load_benchmark(args.benchmark)
    keys = [parse_key(k) for k in args.keys.split(",") if k]
    if not keys:
        raise UsageError("no planner keys given")
    base = default_seed(args.seed) if args.seed is not None or "GITSTAR_SEED" in os.environ else bench.seed_base
    tasks = [
        RunTask(label, mode.value, h.to_text() if h else None, i, p.to_dict(), base + r)
        for label, mode, h in keys
        for i, p in enumerate(bench.problems)
        for r in range(p.runs)
    ]
    records = run_all(tasks, args.jobs)
    records.sort(key=lambda r: (r["planner"], r["problem"], r["seed"]))
    out = FsPath(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "runs.jsonl").open("w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")

    groups: dict[tuple[str, str], list[dict[str, Any]]] = {}
    for r in records:
        groups.setdefault((r["planner"], r["problem"]), []).append(r)
    metrics = {k: records_to_metrics(v) for k, v in groups.items()}
    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for (planner, problem), m in sorted(metrics.items()):
            w.writerow([planner, problem, *(fmt(v) for v in m.values())])

    with (out / "improvement.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["planner", "problem", "t_init_med_improvement_pct", "c_final_med_improvement_pct"])
        for (planner, problem), m in sorted(metrics.items()):
            ref = metrics.get(("baseline", problem))
            if planner == "baseline" or ref is None:
                continue
            w.writerow([planner, problem, fmt(improvement_pct(ref.t_init_med, m.t_init_med)),
                        fmt(improvement_pct(ref.c_final_med, m.c_final_med))])

    failures = sum(1 for r in records if "error" in r)
    if failures:
        log.warning("%d run(s) raised and were recorded as failures", failures)
    print(f"{len(records)} runs, {len(metrics)} rows, {failures} warning(s) -> {out}")
    return EXIT_OK


def run_all(tasks: Sequence[RunTask], jobs: int) -> list[dict[str, Any]]:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return [run_task(t) for t in tasks]


def load_benchmark(path: str) -> BenchmarkSet:
    doc = read_json(path)
    try:
        return BenchmarkSet.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path} is not a benchmark file: {exc}") from exc
    except ContractError as exc:
        raise UsageError(str(exc)) from exc


# --------------------------------------------------------------------------- train


def cmd_train(args: argparse.Namespace) -> int:
    bench = load_benchmark(args.benchmark)
    preset = {"population": 30, "generations": 8} if args.preset == "desk" else {}
    fields = {
        "population": args.pop, "generations": args.gens, "p_c": args.pc, "p_m": args.pm,
        "tournament": args.tourn, "max_depth": args.depth,
    }
    chosen = {**GPParams().__dict__, **preset, **{k: v for k, v in fields.items() if v is not None}}
    if chosen["population"] < 2:
        raise UsageError("--pop must be at least 2")
    try:
        params = GPParams(**chosen)
        cfg = RewardConfig(delta=args.delta, c1=args.c1, c2=args.c2, abort_margin=args.abort_margin)
    except ContractError as exc:
        raise UsageError(str(exc)) from exc
    out = FsPath(args.out_dir)
    inject = [CONSTANT] if args.inject_constant else []
    result = train_rgp(
        bench, params, cfg, default_seed(args.seed), inject=inject,
        baseline_path=out / "baseline_metrics.json", jobs=args.jobs,
        progress=lambda s: print(f"gen {s.gen}: min {s.min_rho:.3f} mean {s.mean_rho:.3f} max {s.max_rho:.3f}", flush=True),
    )
    gens, winner = write_outputs(result, out)
    print(f"winner rho={result.best_rho:.6f} -> {winner}")
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gitstar", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("worldgen", help="generate a benchmark problem")
    p.add_argument("--kind", required=True, help="dw, rr or ge")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--params", help="JSON object or path to one")
    p.set_defaults(func=cmd_worldgen)

    p = sub.add_parser("plan", help="run the planner once")
    p.add_argument("--problem", required=True)
    p.add_argument("--key", default="git", help="git, baseline or file:PATH")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--time-limit", type=float)
    budget.add_argument("--batch-budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="JSONL file to append the run record to")
    p.add_argument("--path-out", help="write the solution states as text")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="benchmark planner keys over a problem set")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--keys", default="git,baseline", help="comma-separated keys")
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--seed", type=int, help="first run seed (default: benchmark seed_base)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", help="evolve a key with reward-driven GP")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--pop", type=int)
    p.add_argument("--gens", type=int)
    p.add_argument("--pc", type=float)
    p.add_argument("--pm", type=float)
    p.add_argument("--tourn", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--delta", type=float, default=10.0)
    p.add_argument("--c1", type=float, default=0.1)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--abort-margin", type=float, default=1.5)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", default="train_out")
    p.add_argument("--preset", choices=["desk"])
    p.add_argument("--inject-constant", action="store_true", help="seed the population with a constant key")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_train)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gitstar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"gitstar: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ContractError, json.JSONDecodeError) as exc:
        print(f"gitstar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # invariant breaches and other internal faults
        log.exception("internal error")
        print(f"gitstar: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
