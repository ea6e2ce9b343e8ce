"""Batch sampling, the RGG rewiring radius and exact radius-neighbour queries."""

from __future__ import annotations

import math
from collections import defaultdict
from typing import TYPE_CHECKING

import numpy as np
from scipy.spatial import cKDTree

from .world import ContractError, ProblemInstance

if TYPE_CHECKING:
    from .planner import SearchTree

START_ID = 0
GOAL_ID = 1

RGG_ETA = 1.001
REWIRE_FACTOR = 1.2
DRAW_CAP = 1_000_000
INVALID_CAP = 50_000


class SamplingExhausted(RuntimeError):
    pass


class SampleStore:
    """Valid states (with stable integer ids) and the rejected, in-collision draws.

    Id 0 is the start and id 1 the goal; both are never pruned.
    """

    def __init__(self, problem: ProblemInstance, batch_size: int = 100, invalid_cap: int = INVALID_CAP):
        if batch_size < 1:
            raise ContractError("batch_size must be positive")
        self.problem = problem
        self.batch_size = batch_size
        self.invalid_cap = invalid_cap
        n = problem.dimension
        self._points = np.empty((256, n))
        self._alive = np.zeros(256, dtype=bool)
        self.size = 0
        self.invalid = np.empty((0, n))
        self.n_drawn = 0  # validity-checked draws, valid or not
        self.n_rejected_informed = 0
        self._append(problem.start_array[None, :])
        self._append(problem.goal_center[None, :])

    def _append(self, pts: np.ndarray) -> None:
        need = self.size + len(pts)
        if need > len(self._points):
            cap = max(need, 2 * len(self._points))
            grown = np.empty((cap, self.problem.dimension))
            grown[: self.size] = self._points[: self.size]
            alive = np.zeros(cap, dtype=bool)
            alive[: self.size] = self._alive[: self.size]
            self._points, self._alive = grown, alive
        self._points[self.size : need] = pts
        self._alive[self.size : need] = True
        self.size = need

    def add_invalid(self, pts: np.ndarray) -> None:
        if len(pts):
            self.invalid = np.concatenate([self.invalid, pts])[-self.invalid_cap :]

    @property
    def points(self) -> np.ndarray:
        """Coordinates indexed by id (dead ids keep their coordinates)."""
        return self._points[: self.size]

    @property
    def alive(self) -> np.ndarray:
        return self._alive[: self.size]

    @property
    def alive_ids(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    @property
    def valid_samples(self) -> np.ndarray:
        return self.points[self.alive]

    @property
    def invalid_samples(self) -> np.ndarray:
        return self.invalid

    @property
    def n_samples(self) -> int:
        return self.n_drawn

    def remove(self, ids: np.ndarray) -> int:
        ids = np.asarray(ids, dtype=int)
        ids = ids[(ids != START_ID) & (ids != GOAL_ID)]
        ids = ids[self._alive[ids]]
        self._alive[ids] = False
        return len(ids)


def informed_cost(problem: ProblemInstance, pts: np.ndarray) -> np.ndarray:
    """Admissible cost of the best path through each point: |x - start| + dist(x, goal box)."""
    pts = np.asarray(pts, dtype=float)
    return np.linalg.norm(pts - problem.start_array, axis=-1) + problem.goal_box.distance(pts)


def sample_batch(
    problem: ProblemInstance,
    store: SampleStore,
    rng: np.random.Generator,
    cost_bound: float = math.inf,
    draw_cap: int = DRAW_CAP,
) -> int:
    """Draw uniform states until ``store.batch_size`` valid ones are accepted.

    With a finite ``cost_bound`` draws outside the informed set are discarded
    before any collision check and are not recorded as invalid.
    """
    n = problem.dimension
    want = store.batch_size
    accepted = 0
    drawn = 0
    rate = 1.0
    while accepted < want:
        if drawn >= draw_cap:
            raise SamplingExhausted(f"no batch after {draw_cap} draws")
        chunk = int(min(draw_cap - drawn, max(256, 1.5 * (want - accepted) / max(rate, 1e-4))))
        pts = rng.uniform(0.0, 1.0, (chunk, n))
        drawn += chunk
        if math.isfinite(cost_bound):
            inside = informed_cost(problem, pts) < cost_bound
            store.n_rejected_informed += int((~inside).sum())
            pts = pts[inside]
        ok = problem.valid_mask(pts)
        if ok.sum() > want - accepted:
            last = int(np.flatnonzero(ok)[want - accepted - 1])
            pts, ok = pts[: last + 1], ok[: last + 1]
        rate = max(ok.sum() / chunk, 1e-6)
        store.n_drawn += len(pts)
        store._append(pts[ok])
        store.add_invalid(pts[~ok])
        accepted += int(ok.sum())
    return accepted


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def informed_measure(problem: ProblemInstance, cost: float) -> float:
    """Lebesgue measure of the prolate hyperspheroid {x : |x-start| + |x-goal| < cost}, capped at 1."""
    if not math.isfinite(cost):
        return 1.0
    d = problem.dimension
    c_min = float(np.linalg.norm(problem.goal_center - problem.start_array))
    if cost <= c_min:
        return 1e-12
    semi_minor = math.sqrt(cost**2 - c_min**2) / 2
    return min(1.0, unit_ball_volume(d) * (cost / 2) * semi_minor ** (d - 1))


def rgg_radius(
    q: int,
    d: int,
    informed_measure: float = 1.0,
    eta: float = RGG_ETA,
    rewire_factor: float = REWIRE_FACTOR,
) -> float:
    """Rewiring radius of the r-disc random geometric graph over ``q`` samples."""
    if q < 2:
        raise ContractError("rgg_radius needs q >= 2")
    if informed_measure <= 0 or d < 1:
        raise ContractError("measure and dimension must be positive")
    base = 2.0 * (1.0 + 1.0 / d) * (informed_measure / unit_ball_volume(d)) * (math.log(q) / q)
    return rewire_factor * eta * base ** (1.0 / d)


class EdgeSet:
    """Undirected set of vertex pairs with per-vertex lookup."""

    def __init__(self) -> None:
        self._adj: dict[int, set[int]] = defaultdict(set)
        self.count = 0

    def add(self, a: int, b: int) -> bool:
        if b in self._adj[a]:
            return False
        self._adj[a].add(b)
        self._adj[b].add(a)
        self.count += 1
        return True

    def __contains__(self, edge: tuple[int, int]) -> bool:
        a, b = edge
        return a in self._adj and b in self._adj[a]

    def partners(self, v: int) -> set[int]:
        return self._adj.get(v, set())

    def __len__(self) -> int:
        return self.count


class NeighborIndex:
    """Exact Euclidean radius queries over a fixed set of (id, point) pairs."""

    def __init__(self, points: np.ndarray, ids: np.ndarray, radius: float):
        self.ids = np.asarray(ids, dtype=int)
        self.points = np.asarray(points, dtype=float)
        self.radius = float(radius)
        self._kd = cKDTree(self.points)
        self._adjacency: dict[int, np.ndarray] | None = None

    def query(self, x: np.ndarray, r: float | None = None, exclude: int | None = None) -> np.ndarray:
        """Ids of indexed points within distance ``r`` of ``x`` (excluding ``exclude``)."""
        r = self.radius if r is None else r
        hits = self.ids[np.asarray(self._kd.query_ball_point(np.asarray(x, dtype=float), r), dtype=int)]
        if exclude is not None:
            hits = hits[hits != exclude]
        return np.sort(hits)

    def adjacency(self) -> dict[int, np.ndarray]:
        """All radius neighbourhoods at once, keyed by id."""
        if self._adjacency is None:
            lists = self._kd.query_ball_point(self.points, self.radius)
            self._adjacency = {}
            for row, hits in enumerate(lists):
                vid = int(self.ids[row])
                nb = self.ids[np.asarray(hits, dtype=int)]
                self._adjacency[vid] = np.sort(nb[nb != vid])
        return self._adjacency

    def around(self, vid: int) -> np.ndarray:
        return self.adjacency().get(int(vid), np.empty(0, dtype=int))


def neighbors(
    x_t: int, index: NeighborIndex, tree: "SearchTree | None", invalid_edges: EdgeSet
) -> np.ndarray:
    """Radius neighbours of ``x_t``, plus its tree parent and children, minus known-invalid edges."""
    nbrs = index.around(x_t)
    if tree is not None and x_t in tree:
        links = list(tree.children_of(x_t))
        parent = tree.parent_of(x_t)
        if parent >= 0:
            links.append(parent)
        extra = np.setdiff1d(np.asarray(links, dtype=int), nbrs)
        if len(extra):
            nbrs = np.union1d(nbrs, extra)
    bad = invalid_edges.partners(x_t)
    if bad:
        nbrs = nbrs[~np.isin(nbrs, np.fromiter(bad, dtype=int, count=len(bad)))]
    return nbrs
