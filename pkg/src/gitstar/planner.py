"""The anytime GIT* planner.

Each batch adds uniform samples, rebuilds a lazy reverse search from the goal
over the r-disc graph (edges admitted with a one-state midpoint probe), then
runs a forward A* from the start that uses the reverse labels as its heuristic
and validates every edge it commits to.  Forward failures on reverse-tree
edges repair the reverse tree and the loop resumes.
"""

from __future__ import annotations

import enum
import heapq
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .gp import EdgeContext, ExprIndividual
from .heuristics import ApfConfig, potential_field
from .sampling import (
    GOAL_ID,
    REWIRE_FACTOR,
    RGG_ETA,
    START_ID,
    EdgeSet,
    NeighborIndex,
    SampleStore,
    SamplingExhausted,
    informed_cost,
    informed_measure,
    rgg_radius,
    sample_batch,
)
from .world import (
    ContractError,
    Path,
    ProblemInstance,
    default_resolution,
    edge_check,
    path_length,
    segment_hits_obstacle,
)

KeyArrays = tuple[np.ndarray, np.ndarray]
KeyFunction = Callable[[Mapping[str, Any]], KeyArrays]


class KeyMode(str, enum.Enum):
    GIT = "git"
    BASELINE = "baseline"
    FILE = "file"


def git_key(ctx: Mapping[str, Any] | EdgeContext) -> KeyArrays:
    """The evolved winner key; works element-wise on arrays."""
    if isinstance(ctx, EdgeContext):
        ctx = ctx.as_mapping()
    du = np.abs(np.asarray(ctx["U_T"]) - np.asarray(ctx["U_S"]))
    first = (np.asarray(ctx["G_HAT_T"]) - math.pi) * np.log1p(du) / (1.0 + np.asarray(ctx["W_DYN"]))
    second = np.sqrt(np.asarray(ctx["E_BAR_S"]) + np.asarray(ctx["E_BAR_EDGE"])) * np.log(
        np.maximum(np.asarray(ctx["D_BAR_T"]), 1.0)
    )
    return _maybe_scalar(first), _maybe_scalar(second)


def baseline_key(ctx: Mapping[str, Any] | EdgeContext) -> KeyArrays:
    """Straight-line cost through the edge, ties broken by accumulated effort."""
    if isinstance(ctx, EdgeContext):
        ctx = ctx.as_mapping()
    first = np.asarray(ctx["G_HAT_T"]) + np.asarray(ctx["C_HAT"]) + np.asarray(ctx["H_HAT_T"])
    second = np.asarray(ctx["E_BAR_S"]) + np.asarray(ctx["E_BAR_EDGE"])
    return _maybe_scalar(first), _maybe_scalar(second)


def _maybe_scalar(x: np.ndarray) -> Any:
    return float(x) if np.ndim(x) == 0 else x


def expression_key(ind: ExprIndividual) -> KeyFunction:
    return lambda ctx: (ind.primary.evaluate(ctx), ind.tiebreak.evaluate(ctx))


def inflation_factor(dimension: int, n_samples: int) -> float:
    if dimension < 1 or n_samples < 1:
        raise ContractError("inflation factor needs D >= 1 and N >= 1")
    n = float(n_samples)
    return 1.0 + (math.log(dimension) + math.sqrt(dimension)) / (math.sqrt(n) + math.log(n) + 1.0)


def truncation_factor(n_samples: int) -> float:
    if n_samples < 1:
        raise ContractError("truncation factor needs N >= 1")
    return 1.0 + 3.0 * math.pi / n_samples


@dataclass(frozen=True)
class PlannerConfig:
    batch_size: int = 100
    rgg_eta: float = RGG_ETA
    rewire_factor: float = REWIRE_FACTOR
    edge_resolution: float | None = None  # defaults to default_resolution(dimension)
    apf: ApfConfig = field(default_factory=ApfConfig)
    key_mode: KeyMode = KeyMode.GIT
    heuristic: ExprIndividual | None = None
    time_limit: float | None = None  # seconds; 1.0 when no batch budget is given either
    batch_budget: int | None = None
    use_adaptive_factors: bool = True
    inflation: float = 1.0  # used when factors are not adaptive
    truncation: float = 1.0
    converge_reverse: bool = False  # run every reverse pass to an empty queue
    reverse_stop: str = "key"  # "key", "cost" or "first"; see GITStar._reverse_done
    stop_on_first: bool = False  # return as soon as an initial solution exists
    check_invariants: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "key_mode", KeyMode(self.key_mode))
        if self.batch_size < 1:
            raise ContractError("batch_size must be positive")
        if self.rgg_eta <= 0 or self.rewire_factor <= 0:
            raise ContractError("radius factors must be positive")
        if self.edge_resolution is not None and self.edge_resolution <= 0:
            raise ContractError("edge_resolution must be positive")
        if self.time_limit is None and self.batch_budget is None:
            object.__setattr__(self, "time_limit", 1.0)
        if self.time_limit is not None and self.time_limit <= 0:
            raise ContractError("time_limit must be positive")
        if self.batch_budget is not None and self.batch_budget < 1:
            raise ContractError("batch_budget must be at least 1")
        if self.inflation < 1 or self.truncation < 1:
            raise ContractError("static factors must be >= 1")
        if self.reverse_stop not in ("key", "cost", "first"):
            raise ContractError(f"unknown reverse_stop {self.reverse_stop!r}")
        if self.key_mode is KeyMode.FILE and self.heuristic is None:
            raise ContractError("key_mode 'file' needs a heuristic")

    @property
    def effort_clock(self) -> bool:
        """Batch-budget runs report collision checks instead of seconds, for determinism."""
        return self.batch_budget is not None

    def key_function(self) -> KeyFunction:
        if self.key_mode is KeyMode.GIT:
            return git_key
        if self.key_mode is KeyMode.BASELINE:
            return baseline_key
        return expression_key(self.heuristic)


class SearchTree:
    """Array-backed tree over sample ids with cost and effort labels."""

    def __init__(self, points: np.ndarray, root: int):
        n = len(points)
        self.points = points
        self.root = root
        self.parent = np.full(n, -1, dtype=np.int64)
        self.g = np.full(n, math.inf)
        self.effort = np.full(n, math.inf)
        self.member = np.zeros(n, dtype=bool)
        self.children: dict[int, set[int]] = defaultdict(set)
        self.member[root] = True
        self.g[root] = 0.0
        self.effort[root] = 0.0

    def __contains__(self, v: object) -> bool:
        v = int(v)  # type: ignore[arg-type]
        return 0 <= v < len(self.member) and bool(self.member[v])

    def __len__(self) -> int:
        return int(self.member.sum())

    def vertices(self) -> np.ndarray:
        return np.flatnonzero(self.member)

    def parent_of(self, v: int) -> int:
        return int(self.parent[v])

    def children_of(self, v: int) -> set[int]:
        return self.children.get(v, set())

    def set_parent(self, v: int, p: int, g: float, effort: float) -> bool:
        """Attach (or rewire) ``v`` under ``p``; returns True if ``v`` is new to the tree."""
        added = not self.member[v]
        old = self.parent[v]
        if old >= 0:
            self.children[int(old)].discard(v)
        self.parent[v] = p
        self.children[p].add(v)
        self.member[v] = True
        self.g[v] = g
        self.effort[v] = effort
        return added

    def remove_subtree(self, v: int) -> list[int]:
        """Detach ``v`` and every descendant; returns the removed ids."""
        if v == self.root:
            raise ContractError("cannot remove the root")
        old = self.parent[v]
        if old >= 0:
            self.children[int(old)].discard(v)
        removed = []
        stack = [v]
        while stack:
            u = stack.pop()
            removed.append(u)
            stack.extend(self.children.pop(u, ()))
            self.member[u] = False
            self.parent[u] = -1
            self.g[u] = math.inf
            self.effort[u] = math.inf
        return removed

    def branch(self, v: int) -> list[int]:
        """Ids from ``v`` up to the root, inclusive."""
        out = [v]
        while v != self.root:
            v = int(self.parent[v])
            out.append(v)
        return out

    def relabel(self, resolution: float) -> None:
        """Recompute g and effort top-down so every label matches its branch exactly."""
        stack = [self.root]
        while stack:
            p = stack.pop()
            for c in self.children.get(p, ()):
                length = float(np.linalg.norm(self.points[c] - self.points[p]))
                self.g[c] = self.g[p] + length
                self.effort[c] = self.effort[p] + math.ceil(length / resolution)
                stack.append(c)

    def check_invariants(self, tol: float = 1e-9) -> None:
        if self.g[self.root] != 0 or self.parent[self.root] != -1:
            raise AssertionError("root must have g = 0 and no parent")
        seen = {self.root}
        stack = [self.root]
        while stack:
            p = stack.pop()
            for c in self.children.get(p, ()):
                if c in seen:
                    raise AssertionError(f"cycle through {c}")
                if self.parent[c] != p or not self.member[c]:
                    raise AssertionError(f"parent/children mismatch at {c}")
                length = float(np.linalg.norm(self.points[c] - self.points[p]))
                if abs(self.g[c] - self.g[p] - length) > tol * max(1.0, self.g[c]):
                    raise AssertionError(f"inconsistent g at {c}")
                seen.add(c)
                stack.append(c)
        if len(seen) != len(self):
            raise AssertionError("tree vertices unreachable from the root")


class EdgeQueue:
    """Min-heap of (x_s, x_t) edges on a lexicographic key; equal keys pop in insertion order."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, float, int, int, int]] = []
        self._seq = 0

    def push(self, k1: float, k2: float, s: int, t: int) -> int:
        seq = self._seq
        heapq.heappush(self._heap, (k1, k2, seq, s, t))
        self._seq += 1
        return seq

    def push_many(self, k1: np.ndarray, k2: np.ndarray, s: int, targets: np.ndarray) -> range:
        first = self._seq
        heap = self._heap
        for a, b, t in zip(k1.tolist(), k2.tolist(), targets.tolist()):
            heapq.heappush(heap, (a, b, self._seq, s, t))
            self._seq += 1
        return range(first, self._seq)

    def pop(self) -> tuple[float, float, int, int, int]:
        return heapq.heappop(self._heap)

    def peek(self) -> tuple[float, float, int, int, int]:
        return self._heap[0]

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class PlanResult:
    success: bool
    path: Path | None
    improvements: list[tuple[float, float]]
    t_init: float
    c_init: float
    c_final: float
    batches: int
    checks: int
    checks_init: float
    n_samples: int
    elapsed: float
    stats: dict[str, int] = field(default_factory=dict)

    def to_record(self, seed: int | None = None) -> dict[str, Any]:
        fin = lambda x: x if math.isfinite(x) else None  # noqa: E731
        return {
            "seed": seed,
            "t_init": fin(self.t_init),
            "c_init": fin(self.c_init),
            "c_final": fin(self.c_final),
            "improvements": [[t, c] for t, c in self.improvements],
            "success": self.success,
            "checks": self.checks,
            "checks_init": fin(self.checks_init),
            "samples": self.n_samples,
            "batches": self.batches,
        }


class _Timeout(Exception):
    pass


class _Repair(Exception):
    def __init__(self, s: int, t: int):
        self.edge = (s, t)


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class GITStar:
    def __init__(self, problem: ProblemInstance, config: PlannerConfig, rng: np.random.Generator):
        self.problem = problem
        self.config = config
        self.rng = rng
        self.dim = problem.dimension
        self.resolution = config.edge_resolution or default_resolution(self.dim)
        self.key_fn = config.key_function()
        self.store = SampleStore(problem, config.batch_size)
        self.invalid_edges = EdgeSet()
        self.probed_ok: set[tuple[int, int]] = set()
        self.full_cache: dict[tuple[int, int], bool] = {}
        self.n_probes = 0
        self.n_full_checks = 0
        self.c_inc = math.inf
        self.best: list[int] | None = None
        self.best_states: np.ndarray | None = None
        self.improvements: list[tuple[float, float]] = []
        self.checks_init = math.inf
        self.stats: dict[str, int] = defaultdict(int)
        self._deadline = math.inf
        self._t0 = 0.0
        self._ticks = 0

    # ---------------------------------------------------------------- bookkeeping

    @property
    def effort(self) -> int:
        return self.store.n_drawn + self.n_probes + self.n_full_checks

    def _now(self) -> float:
        if self.config.effort_clock:
            return float(self.effort)
        return time.perf_counter() - self._t0

    def _tick(self) -> None:
        self._ticks += 1
        if self._ticks & 63 == 0 and time.perf_counter() > self._deadline:
            raise _Timeout

    # ---------------------------------------------------------------- main loop

    def plan(self, progress: Callable[[dict[str, Any]], None] | None = None) -> PlanResult:
        cfg = self.config
        self._t0 = time.perf_counter()
        if cfg.time_limit is not None:
            self._deadline = self._t0 + cfg.time_limit
        batches = 0
        try:
            while cfg.batch_budget is None or batches < cfg.batch_budget:
                if time.perf_counter() > self._deadline:
                    break
                batches += 1
                self._run_batch(progress)
                if cfg.stop_on_first and self.improvements:
                    break
        except (_Timeout, SamplingExhausted):
            pass
        elapsed = time.perf_counter() - self._t0
        success = self.best_states is not None
        path = Path(self.best_states) if success else None
        t_init, c_init = self.improvements[0] if success else (math.inf, math.inf)
        self.stats["invalid_edges"] = len(self.invalid_edges)
        return PlanResult(
            success=success,
            path=path,
            improvements=list(self.improvements),
            t_init=t_init,
            c_init=c_init,
            c_final=self.c_inc,
            batches=batches,
            checks=self.effort,
            checks_init=self.checks_init,
            n_samples=self.store.n_drawn,
            elapsed=elapsed,
            stats=dict(self.stats),
        )

    def _run_batch(self, progress: Callable[[dict[str, Any]], None] | None) -> None:
        problem, cfg = self.problem, self.config
        sample_batch(problem, self.store, self.rng, cost_bound=self.c_inc)
        self._tick()
        pts = self.store.points
        alive = self.store.alive_ids
        q = len(alive)
        radius = rgg_radius(
            max(q, 2), self.dim, informed_measure(problem, self.c_inc), cfg.rgg_eta, cfg.rewire_factor
        )
        self.index = NeighborIndex(pts[alive], alive, radius)
        self.adjacency = self.index.adjacency()
        self._lengths: dict[int, np.ndarray] = {}
        if cfg.use_adaptive_factors:
            self.eps_infl = inflation_factor(self.dim, q)
            self.eps_trunc = truncation_factor(q)
        else:
            self.eps_infl, self.eps_trunc = cfg.inflation, cfg.truncation
        self.n_graph = q
        self.ghat = np.linalg.norm(pts - problem.start_array, axis=1)
        self.hhat = problem.goal_box.distance(pts)
        self.dbar = np.ceil(self.ghat / self.resolution)
        self.U = potential_field(pts, self.store.invalid, cfg.apf.anchor(problem), cfg.apf)

        self._refresh_reverse()
        self._reverse_search()
        while self._could_improve():
            try:
                found = self._forward_search()
            except _Repair as rep:
                self._repair(*rep.edge)
                self._reverse_search()
                continue
            if found is not None:
                self._accept(found, progress)
            break
        self.tree_R.relabel(self.resolution)
        if cfg.check_invariants:
            self.tree_R.check_invariants()
            if not np.array_equal(self.w_dyn, self._count_importance()):
                raise AssertionError("dynamic importance drifted from its definition")

    def _could_improve(self) -> bool:
        return START_ID in self.tree_R and self.tree_R.g[START_ID] < self.c_inc

    def _accept(self, ids: list[int], progress) -> None:
        states = self.store.points[ids].copy()
        cost = path_length(states)
        if not cost < self.c_inc:
            return
        self.c_inc = cost
        self.best = ids
        self.best_states = states
        now = self._now()
        if not self.improvements:
            self.checks_init = float(self.effort)
        self.improvements.append((now, cost))
        if progress is not None:
            progress({"t": now, "cost": cost, "checks": self.effort})
        pts = self.store.points
        alive = self.store.alive_ids
        doomed = alive[informed_cost(self.problem, pts[alive]) >= cost]
        self.stats["pruned"] += self.store.remove(doomed)

    # ---------------------------------------------------------------- graph

    def _graph_neighbors(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """r-disc neighbours of ``s`` with the edge lengths, cached for the batch."""
        nb = self.adjacency.get(s)
        if nb is None:
            return np.empty(0, dtype=np.int64), np.empty(0)
        lengths = self._lengths.get(s)
        if lengths is None:
            pts = self.store.points
            lengths = self._lengths[s] = np.linalg.norm(pts[nb] - pts[s], axis=1)
        return nb, lengths

    def _count_importance(self) -> np.ndarray:
        """Dynamic importance of every vertex, counted from scratch."""
        w = np.zeros(len(self.store.points))
        member = self.tree_R.member
        for v, nb in self.adjacency.items():
            w[v] = member[nb].sum()
        return w

    # ---------------------------------------------------------------- reverse search

    def _refresh_reverse(self) -> None:
        """Start the batch's reverse search from the goal; edge probe results are kept."""
        self.tree_R = SearchTree(self.store.points, GOAL_ID)
        self.rq = EdgeQueue()
        self.bounds: list[tuple[float, int]] = []
        self.pending: set[int] = set()
        self.start_key: float | None = None
        self.w_dyn = np.zeros(len(self.store.points))
        self.w_dyn[self.adjacency[GOAL_ID]] += 1
        self._expand_reverse(GOAL_ID)

    def _context(self, s: int, targets: np.ndarray, lengths: np.ndarray) -> dict[str, Any]:
        return {
            "G_HAT_T": self.eps_infl * self.ghat[targets],
            "H_HAT_T": self.hhat[targets],
            "C_HAT": lengths,
            "E_BAR_S": self.tree_R.effort[s],
            "E_BAR_EDGE": np.ceil(lengths / self.resolution),
            "D_BAR_T": self.dbar[targets],
            "DIM": float(self.dim),
            "U_S": self.U[s],
            "U_T": self.U[targets],
            "W_DYN": self.w_dyn[targets],
            "N_SAMPLES": float(self.n_graph),
        }

    def _expand_reverse(self, s: int) -> None:
        """Queue key-ordered edges from ``s`` to every neighbour not yet in the tree."""
        tree = self.tree_R
        nb, lengths = self._graph_neighbors(s)
        if len(nb) == 0:
            return
        through = tree.g[s] + lengths
        keep = ~tree.member[nb]
        if math.isfinite(self.c_inc):
            keep &= through + self.ghat[nb] < self.c_inc
        if not keep.any():
            return
        nb, lengths, through = nb[keep], lengths[keep], through[keep]
        k1, k2 = self.key_fn(self._context(s, nb, lengths))
        if np.ndim(k1) == 0:
            k1 = np.full(nb.shape, float(k1))
        if np.ndim(k2) == 0:
            k2 = np.full(nb.shape, float(k2))
        seqs = self.rq.push_many(k1, k2, s, nb)
        if self._tracking:
            for b, seq in zip((through + self.ghat[nb]).tolist(), seqs):
                heapq.heappush(self.bounds, (b, seq))
            self.pending.update(seqs)

    @property
    def _tracking(self) -> bool:
        return self.config.reverse_stop == "cost"

    def _lower_bound(self) -> float:
        while self.bounds and self.bounds[0][1] not in self.pending:
            heapq.heappop(self.bounds)
        return self.bounds[0][0] if self.bounds else math.inf

    def _reverse_done(self) -> bool:
        """Truncation rule for the reverse pass, checked before every pop.

        "key": stop once the best queued key exceeds the key that connected the
        start, widened by eps_trunc (measured on |key| so negative keys work).
        "cost": stop once no queued edge can lower the start label by more than
        the factor eps_trunc.  "first": stop as soon as the start is labelled.
        """
        tree = self.tree_R
        if self.config.converge_reverse or START_ID not in tree:
            return False
        mode = self.config.reverse_stop
        if mode == "first":
            return True
        if mode == "cost":
            return self.eps_trunc * self._lower_bound() >= tree.g[START_ID]
        k = self.start_key
        return k is None or self.rq.peek()[0] > k + (self.eps_trunc - 1.0) * abs(k)

    def _probe(self, s: int, t: int) -> bool:
        """Sparse check: the endpoints are valid samples, so only the midpoint is tested."""
        key = _pair(s, t)
        if key in self.probed_ok or self.full_cache.get(key):
            return True
        self.n_probes += 1
        pts = self.store.points
        mid = 0.5 * (pts[s] + pts[t])
        if self.problem.valid_mask(mid[None, :])[0]:
            self.probed_ok.add(key)
            return True
        self.invalid_edges.add(s, t)
        self.stats["probe_rejects"] += 1
        return False

    def _reverse_search(self) -> None:
        """Grow the reverse tree in key order until the stop rule fires or the queue empties."""
        tree = self.tree_R
        pts = self.store.points
        alive = self.store.alive
        while len(self.rq) and not self._reverse_done():
            self._tick()
            k1, _, seq, s, t = self.rq.pop()
            self.pending.discard(seq)
            if tree.member[t] or not tree.member[s] or not alive[t] or (s, t) in self.invalid_edges:
                continue
            length = float(np.linalg.norm(pts[t] - pts[s]))
            if tree.g[s] + length + self.ghat[t] >= self.c_inc:
                continue
            if not self._probe(s, t):
                continue
            self._admit(s, t, length)
            if t == START_ID:
                self.start_key = k1

    def _admit(self, s: int, t: int, length: float) -> None:
        """Add ``t`` under its cheapest probe-valid tree neighbour, then push the improvement on."""
        tree = self.tree_R
        best, best_len = s, length
        nb, lengths = self._graph_neighbors(t)
        through = tree.g[nb] + lengths
        better = tree.member[nb] & (through < tree.g[s] + length)
        if better.any():
            order = np.argsort(through[better], kind="stable")
            for u, c in zip(nb[better][order].tolist(), lengths[better][order].tolist()):
                if (u, t) not in self.invalid_edges and self._probe(u, t):
                    best, best_len = u, c
                    break
        self.stats["reverse_edges"] += 1
        tree.set_parent(t, best, tree.g[best] + best_len, tree.effort[best] + math.ceil(best_len / self.resolution))
        self.w_dyn[self.adjacency[t]] += 1
        self._propagate(t)
        self._expand_reverse(t)

    def _propagate(self, root: int) -> None:
        """Cost-ordered relabelling of tree vertices reachable more cheaply through ``root``."""
        tree = self.tree_R
        heap = [(tree.g[root], root)]
        while heap:
            g, v = heapq.heappop(heap)
            if g > tree.g[v]:
                continue
            nb, lengths = self._graph_neighbors(v)
            through = g + lengths
            better = tree.member[nb] & (through < tree.g[nb])
            if not better.any():
                continue
            for u, c, gu in zip(nb[better].tolist(), lengths[better].tolist(), through[better].tolist()):
                if gu < tree.g[u] and (v, u) not in self.invalid_edges and self._probe(v, u):
                    self.stats["reverse_rewires"] += 1
                    tree.set_parent(u, v, gu, tree.effort[v] + math.ceil(c / self.resolution))
                    heapq.heappush(heap, (gu, u))

    def _repair(self, s: int, t: int) -> None:
        """Drop the reverse subtree cut off by the invalid edge and requeue its border."""
        tree = self.tree_R
        child = s if tree.parent[s] == t else t
        removed = tree.remove_subtree(child)
        self.stats["repairs"] += 1
        if not tree.member[START_ID]:
            self.start_key = None
        border: set[int] = set()
        for u in removed:
            nb = self.adjacency.get(u)
            if nb is None:
                continue
            self.w_dyn[nb] -= 1
            border.update(nb[tree.member[nb]].tolist())
        for v in sorted(border):
            self._expand_reverse(v)

    # ---------------------------------------------------------------- forward search

    def _full_check(self, s: int, t: int) -> bool:
        key = _pair(s, t)
        hit = self.full_cache.get(key)
        if hit is not None:
            return hit
        pts = self.store.points
        ok, used = edge_check(self.problem, pts[s], pts[t], self.resolution)
        self.n_full_checks += used
        if ok and segment_hits_obstacle(self.problem, pts[s], pts[t]):
            ok = False
        self.full_cache[key] = ok
        if not ok:
            self.invalid_edges.add(s, t)
            self.stats["forward_rejects"] += 1
        return ok

    def _forward_search(self) -> list[int] | None:
        """A* from the start over reverse-tree vertices; raises _Repair on a broken reverse edge."""
        tree_R = self.tree_R
        pts = self.store.points
        g_R = tree_R.g
        member = tree_R.member
        n = len(pts)
        g_F = np.full(n, math.inf)
        parent = np.full(n, -1, dtype=np.int64)
        g_F[START_ID] = 0.0
        heap: list[tuple[float, int, int, int]] = []
        seq = 0

        def expand(s: int) -> None:
            nonlocal seq
            nb, lengths = self._graph_neighbors(s)
            through = g_F[s] + lengths
            f = through + g_R[nb]
            keep = member[nb] & (through < g_F[nb]) & (f < min(self.c_inc, g_F[GOAL_ID]))
            for fv, t in zip(f[keep].tolist(), nb[keep].tolist()):
                heapq.heappush(heap, (fv, seq, s, t))
                seq += 1

        expand(START_ID)
        while heap:
            self._tick()
            f, _, s, t = heapq.heappop(heap)
            if f >= self.c_inc or self.eps_trunc * f >= g_F[GOAL_ID]:
                break
            length = float(np.linalg.norm(pts[t] - pts[s]))
            g_new = g_F[s] + length
            if not g_new < g_F[t]:
                continue
            if not self._full_check(s, t):
                if tree_R.parent[s] == t or tree_R.parent[t] == s:
                    raise _Repair(s, t)
                continue
            self.stats["forward_edges"] += 1
            g_F[t] = g_new
            parent[t] = s
            if t != GOAL_ID:
                expand(t)
        if not math.isfinite(g_F[GOAL_ID]):
            return None
        ids = [GOAL_ID]
        while ids[-1] != START_ID:
            ids.append(int(parent[ids[-1]]))
        return ids[::-1]


def plan(
    problem: ProblemInstance,
    config: PlannerConfig,
    rng: np.random.Generator | int | None = None,
    progress: Callable[[dict[str, Any]], None] | None = None,
) -> PlanResult:
    """Run GIT* once; ``rng`` may be a Generator or a seed."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return GITStar(problem, config, rng).plan(progress)

