"""Planning worlds: unit-hypercube state spaces with axis-aligned box obstacles.

Boxes are closed, so a state on an obstacle boundary is in collision.  The
three benchmark families (dividing walls, random rectangles, goal enclosure)
are generated deterministically from ``(kind, dimension, seed, params)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Any, Iterable, Sequence

import numpy as np


class ContractError(ValueError):
    """A caller broke an operation's precondition."""


class GenerationError(RuntimeError):
    """Scenario parameters could not produce a valid instance."""


class Scenario(str, enum.Enum):
    DIVIDING_WALLS = "DividingWalls"
    RANDOM_RECTANGLES = "RandomRectangles"
    GOAL_ENCLOSURE = "GoalEnclosure"
    CUSTOM = "Custom"

    @classmethod
    def parse(cls, name: str) -> "Scenario":
        aliases = {
            "dw": cls.DIVIDING_WALLS,
            "rr": cls.RANDOM_RECTANGLES,
            "ge": cls.GOAL_ENCLOSURE,
            "custom": cls.CUSTOM,
        }
        key = name.strip()
        if key.lower() in aliases:
            return aliases[key.lower()]
        try:
            return cls(key)
        except ValueError:
            raise ContractError(f"unknown scenario kind {name!r}") from None

    @property
    def short(self) -> str:
        return {"DividingWalls": "DW", "RandomRectangles": "RR", "GoalEnclosure": "GE"}.get(
            self.value, "CU"
        )


def _as_tuple(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class AxisBox:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _as_tuple(self.lo))
        object.__setattr__(self, "hi", _as_tuple(self.hi))
        if len(self.lo) != len(self.hi):
            raise ContractError("box corners differ in dimension")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ContractError(f"inverted box {self.lo} .. {self.hi}")

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    def contains(self, x: Sequence[float]) -> bool:
        return all(a <= v <= b for a, v, b in zip(self.lo, x, self.hi))

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance from point(s) ``x`` to the box (0 inside)."""
        x = np.asarray(x, dtype=float)
        gap = np.maximum(np.asarray(self.lo) - x, 0.0) + np.maximum(x - np.asarray(self.hi), 0.0)
        return np.linalg.norm(gap, axis=-1)

    def intersects(self, other: "AxisBox") -> bool:
        return all(
            a_lo <= b_hi and b_lo <= a_hi
            for a_lo, a_hi, b_lo, b_hi in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def to_dict(self) -> dict[str, list[float]]:
        return {"lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class ProblemInstance:
    dimension: int
    obstacles: tuple[AxisBox, ...]
    start: tuple[float, ...]
    goal_box: AxisBox
    scenario_id: Scenario = Scenario.CUSTOM
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", _as_tuple(self.start))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "scenario_id", Scenario(self.scenario_id))
        n = self.dimension
        if n < 2:
            raise ContractError("dimension must be at least 2")
        if len(self.start) != n or self.goal_box.dimension != n:
            raise ContractError("start/goal dimension mismatch")
        if any(box.dimension != n for box in self.obstacles):
            raise ContractError("obstacle dimension mismatch")
        if not is_state_valid(self, self.start):
            raise ContractError("start state is in collision")
        if not is_state_valid(self, self.goal_center):
            raise ContractError("goal center is in collision")
        if self.goal_box.contains(self.start):
            raise ContractError("start lies inside the goal region")

    @cached_property
    def obstacle_lo(self) -> np.ndarray:
        return np.array([b.lo for b in self.obstacles], dtype=float).reshape(-1, self.dimension)

    @cached_property
    def obstacle_hi(self) -> np.ndarray:
        return np.array([b.hi for b in self.obstacles], dtype=float).reshape(-1, self.dimension)

    @cached_property
    def start_array(self) -> np.ndarray:
        return np.asarray(self.start, dtype=float)

    @cached_property
    def goal_center(self) -> np.ndarray:
        return self.goal_box.center

    @property
    def name(self) -> str:
        return f"{self.scenario_id.short}-R{self.dimension}-s{self.seed}"

    def valid_mask(self, points: np.ndarray) -> np.ndarray:
        """Validity of each row of ``points`` (shape ``(k, n)``)."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        if not self.obstacles:
            return np.ones(len(pts), dtype=bool)
        inside = (pts[:, None, :] >= self.obstacle_lo) & (pts[:, None, :] <= self.obstacle_hi)
        return ~inside.all(axis=2).any(axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dimension": self.dimension,
            "start": list(self.start),
            "goal_box": self.goal_box.to_dict(),
            "obstacles": [b.to_dict() for b in self.obstacles],
            "scenario_id": self.scenario_id.value,
            "seed": self.seed,
        }

    def to_json(self, **kwargs: Any) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ProblemInstance":
        return cls(
            dimension=int(doc["dimension"]),
            obstacles=tuple(AxisBox(o["lo"], o["hi"]) for o in doc.get("obstacles", [])),
            start=doc["start"],
            goal_box=AxisBox(doc["goal_box"]["lo"], doc["goal_box"]["hi"]),
            scenario_id=Scenario(doc.get("scenario_id", Scenario.CUSTOM.value)),
            seed=int(doc.get("seed", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        return cls.from_dict(json.loads(text))


@dataclass
class Path:
    states: np.ndarray
    cost: float = field(default=math.nan)

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=float)
        if math.isnan(self.cost):
            self.cost = path_length(self.states)

    def __len__(self) -> int:
        return len(self.states)


def path_length(states: np.ndarray) -> float:
    states = np.asarray(states, dtype=float)
    if len(states) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(states, axis=0), axis=1).sum())


def default_resolution(dimension: int) -> float:
    return 0.002 * math.sqrt(dimension)


def _check_dim(problem: ProblemInstance, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != problem.dimension:
        raise ContractError(f"state has dimension {x.shape[-1]}, problem has {problem.dimension}")
    return x


def is_state_valid(problem: ProblemInstance, x: Sequence[float]) -> bool:
    x = _check_dim(problem, np.asarray(x, dtype=float))
    return bool(problem.valid_mask(x[None, :])[0])


def interpolate(a: np.ndarray, b: np.ndarray, resolution: float) -> np.ndarray:
    """The ``ceil(|a-b|/resolution) + 1`` evenly spaced states from a to b inclusive."""
    steps = int(math.ceil(float(np.linalg.norm(b - a)) / resolution))
    t = np.linspace(0.0, 1.0, steps + 1)[:, None]
    return a + t * (b - a)


@lru_cache(maxsize=4096)
def bisection_order(n: int) -> np.ndarray:
    """Indices 0..n-1 in coarse-to-fine order: both ends, then midpoints of ever finer halves."""
    if n <= 2:
        return np.arange(n)
    order = [0, n - 1]
    spans = [(0, n - 1)]
    while spans:
        nxt = []
        for lo, hi in spans:
            if hi - lo < 2:
                continue
            mid = (lo + hi) // 2
            order.append(mid)
            nxt.extend(((lo, mid), (mid, hi)))
        spans = nxt
    out = np.asarray(order)
    out.flags.writeable = False
    return out


def edge_check(
    problem: ProblemInstance,
    a: Sequence[float],
    b: Sequence[float],
    resolution: float,
    order: str = "bisect",
) -> tuple[bool, int]:
    """Discrete edge check; returns (valid, states checked up to the first hit).

    ``order`` is the visiting order used for that count: "bisect" (coarse to
    fine) or "sweep" (from a to b).  Validity does not depend on it.
    """
    if resolution <= 0:
        raise ContractError("resolution must be positive")
    a = _check_dim(problem, a)
    b = _check_dim(problem, b)
    mask = problem.valid_mask(interpolate(a, b, resolution))
    if mask.all():
        return True, len(mask)
    if order == "sweep":
        return False, int(np.argmin(mask)) + 1
    if order != "bisect":
        raise ContractError(f"unknown check order {order!r}")
    return False, int(np.argmin(mask[bisection_order(len(mask))])) + 1


def is_edge_valid(
    problem: ProblemInstance, a: Sequence[float], b: Sequence[float], resolution: float
) -> bool:
    return edge_check(problem, a, b, resolution)[0]


def segment_hits_obstacle(problem: ProblemInstance, a: Sequence[float], b: Sequence[float]) -> bool:
    """Exact closed segment / closed box intersection (slab test) against every obstacle."""
    if not problem.obstacles:
        return False
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    lo, hi = problem.obstacle_lo, problem.obstacle_hi
    t_enter = np.zeros(len(lo))
    t_exit = np.ones(len(lo))
    flat = np.abs(d) < 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - a) / d
        t2 = (hi - a) / d
    near = np.where(flat, -np.inf, np.minimum(t1, t2))
    far = np.where(flat, np.inf, np.maximum(t1, t2))
    # a flat axis only overlaps when the constant coordinate lies inside the slab
    outside = flat & ((a < lo) | (a > hi))
    t_enter = np.maximum(t_enter, near.max(axis=1))
    t_exit = np.minimum(t_exit, far.min(axis=1))
    hit = (t_enter <= t_exit) & ~outside.any(axis=1)
    return bool(hit.any())


def chord_length(box_lo: np.ndarray, box_hi: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Length of the part of segment a-b inside one closed box (0 if disjoint)."""
    d = b - a
    t0, t1 = 0.0, 1.0
    for i in range(len(a)):
        if abs(d[i]) < 1e-15:
            if a[i] < box_lo[i] or a[i] > box_hi[i]:
                return 0.0
            continue
        u, v = (box_lo[i] - a[i]) / d[i], (box_hi[i] - a[i]) / d[i]
        t0, t1 = max(t0, min(u, v)), min(t1, max(u, v))
        if t0 > t1:
            return 0.0
    return (t1 - t0) * float(np.linalg.norm(d))


def path_is_valid(problem: ProblemInstance, states: np.ndarray, resolution: float) -> bool:
    states = np.asarray(states, dtype=float)
    if not is_state_valid(problem, states[0]):
        return False
    return all(
        is_edge_valid(problem, states[i], states[i + 1], resolution) for i in range(len(states) - 1)
    )


# --------------------------------------------------------------------------- scenarios

# Wall layout in the (x0, x1) plane: (x_lo, x_hi, [(gap center in x1, gap width), ...]).
DIVIDING_WALLS = (
    (0.25, 0.30, ((0.72, 0.03), (0.90, 0.12))),
    (0.45, 0.55, ((0.38, 0.125), (0.64, 0.01))),
    (0.70, 0.75, ((0.25, 0.10), (0.86, 0.05))),
)

DEFAULT_PARAMS: dict[Scenario, dict[str, Any]] = {
    Scenario.DIVIDING_WALLS: {"goal_half_width": 0.025},
    Scenario.RANDOM_RECTANGLES: {
        "count": None,  # 10 * dimension
        "width_min": 0.05,
        "width_max": 0.15,
        "goal_half_width": 0.025,
        "max_redraws": 1000,
    },
    Scenario.GOAL_ENCLOSURE: {"goal_half_width": 0.025, "open": True},
}


def _goal_box(center: np.ndarray, half_width: float) -> AxisBox:
    if not 0.0 < half_width < 0.5:
        raise GenerationError(f"goal_half_width {half_width} outside (0, 0.5)")
    lo = np.clip(center - half_width, 0.0, 1.0)
    hi = np.clip(center + half_width, 0.0, 1.0)
    return AxisBox(lo, hi)


def _dividing_walls(n: int, params: dict[str, Any]) -> tuple[list[AxisBox], np.ndarray, AxisBox]:
    start = np.full(n, 0.5)
    start[0] = 0.05
    goal = np.full(n, 0.5)
    goal[0] = 0.95
    boxes = []
    for x_lo, x_hi, gaps in DIVIDING_WALLS:
        edges = [0.0]
        for center, width in sorted(gaps):
            edges += [center - width / 2, center + width / 2]
        edges.append(1.0)
        for y_lo, y_hi in zip(edges[::2], edges[1::2]):
            lo = np.zeros(n)
            hi = np.ones(n)
            lo[0], hi[0] = x_lo, x_hi
            lo[1], hi[1] = y_lo, y_hi
            boxes.append(AxisBox(lo, hi))
    return boxes, start, _goal_box(goal, params["goal_half_width"])


def _random_rectangles(
    n: int, rng: np.random.Generator, params: dict[str, Any]
) -> tuple[list[AxisBox], np.ndarray, AxisBox]:
    start = np.full(n, 0.4)
    goal_box = _goal_box(np.full(n, 0.9), params["goal_half_width"])
    count = params["count"]
    count = 10 * n if count is None else int(count)
    w_min, w_max = float(params["width_min"]), float(params["width_max"])
    if count < 0 or not 0.0 < w_min <= w_max <= 1.0:
        raise GenerationError(f"bad random-rectangle params count={count} widths=[{w_min}, {w_max}]")
    boxes: list[AxisBox] = []
    for _ in range(count):
        for _attempt in range(int(params["max_redraws"])):
            center = rng.uniform(0.0, 1.0, n)
            width = rng.uniform(w_min, w_max, n)
            box = AxisBox(np.clip(center - width / 2, 0, 1), np.clip(center + width / 2, 0, 1))
            if not box.contains(start) and not box.intersects(goal_box):
                boxes.append(box)
                break
        else:
            raise GenerationError("could not place an obstacle clear of start and goal")
    return boxes, start, goal_box


def _goal_enclosure(n: int, params: dict[str, Any]) -> tuple[list[AxisBox], np.ndarray, AxisBox]:
    start = np.full(n, 0.5)
    start[0] = 0.1
    center = np.full(n, 0.5)
    center[0] = 0.6
    outer, inner = 0.2, 0.1
    boxes = []
    for axis in range(n):
        for side in (-1, 1):
            if axis == 0 and side == 1 and params["open"]:
                continue  # the face farthest from the start stays open
            lo, hi = center - outer, center + outer
            if side < 0:
                hi = hi.copy()
                hi[axis] = center[axis] - inner
            else:
                lo = lo.copy()
                lo[axis] = center[axis] + inner
            boxes.append(AxisBox(lo, hi))
    return boxes, start, _goal_box(center, params["goal_half_width"])


def generate_scenario(
    kind: Scenario | str, dimension: int, seed: int = 0, params: dict[str, Any] | None = None
) -> ProblemInstance:
    kind = Scenario.parse(kind) if isinstance(kind, str) else kind
    if dimension < 2:
        raise ContractError("dimension must be at least 2")
    if kind is Scenario.CUSTOM:
        raise ContractError("custom problems are loaded from JSON, not generated")
    merged = dict(DEFAULT_PARAMS[kind])
    unknown = set(params or {}) - set(merged)
    if unknown:
        raise GenerationError(f"unknown params for {kind.value}: {sorted(unknown)}")
    merged.update(params or {})
    if kind is Scenario.DIVIDING_WALLS:
        boxes, start, goal = _dividing_walls(dimension, merged)
    elif kind is Scenario.RANDOM_RECTANGLES:
        rng = np.random.default_rng(seed)
        boxes, start, goal = _random_rectangles(dimension, rng, merged)
    else:
        boxes, start, goal = _goal_enclosure(dimension, merged)
    try:
        return ProblemInstance(dimension, tuple(boxes), start, goal, kind, int(seed))
    except ContractError as exc:
        raise GenerationError(str(exc)) from exc


def obstacle_free(dimension: int, start: Sequence[float], goal: Sequence[float], half_width: float = 0.025):
    """Convenience constructor for an empty world."""
    return ProblemInstance(
        dimension, (), start, _goal_box(np.asarray(goal, dtype=float), half_width), Scenario.CUSTOM, 0
    )
