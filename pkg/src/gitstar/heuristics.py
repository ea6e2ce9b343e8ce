"""Edge-ordering signals: admissible cost estimates, effort estimates,
artificial-potential-field energy and dynamic importance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np
from scipy.spatial import cKDTree

from .world import ContractError, ProblemInstance

if TYPE_CHECKING:
    from .planner import SearchTree


@dataclass(frozen=True)
class ApfConfig:
    k_r: float = 1e-3
    k_a: float = 1e-2
    rho0: float = 0.1
    r_min: float = 1e-6
    attract_to: str = "start"  # or "goal"

    def __post_init__(self) -> None:
        if min(self.k_r, self.k_a, self.rho0, self.r_min) <= 0:
            raise ContractError("APF gains and distances must be positive")
        if self.r_min >= self.rho0:
            raise ContractError("r_min must be much smaller than rho0")
        if self.attract_to not in ("start", "goal"):
            raise ContractError("attract_to must be 'start' or 'goal'")

    def anchor(self, problem: ProblemInstance) -> np.ndarray:
        return problem.start_array if self.attract_to == "start" else problem.goal_center


def cost_heuristics(
    problem: ProblemInstance, x_s: np.ndarray, x_t: np.ndarray
) -> tuple[float, float, float]:
    """(g_hat(x_t), h_hat(x_t), c_hat(x_s, x_t)); all Euclidean lower bounds."""
    x_s = np.asarray(x_s, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    g_hat = float(np.linalg.norm(x_t - problem.start_array))
    h_hat = float(problem.goal_box.distance(x_t))
    c_hat = float(np.linalg.norm(x_s - x_t))
    return g_hat, h_hat, c_hat


def edge_effort(length: float | np.ndarray, resolution: float) -> float | np.ndarray:
    """Collision checks needed to validate a segment of the given length."""
    return np.ceil(np.asarray(length) / resolution)


def effort_estimates(
    problem: ProblemInstance, x_s: int, x_t: int, tree_R: "SearchTree", resolution: float
) -> tuple[float, float, float]:
    """(e_bar(x_s), e_bar(x_s, x_t), d_bar(x_t)) for vertex ids in ``tree_R``.

    e_bar(x_s) walks the reverse branch of x_s to the goal root and sums the
    per-edge check counts.
    """
    if x_s not in tree_R:
        raise ContractError(f"vertex {x_s} is not in the reverse tree")
    pts = tree_R.points
    branch = 0.0
    v = x_s
    while v != tree_R.root:
        p = tree_R.parent_of(v)
        branch += float(edge_effort(np.linalg.norm(pts[v] - pts[p]), resolution))
        v = p
    e_edge = float(edge_effort(np.linalg.norm(pts[x_s] - pts[x_t]), resolution))
    d_bar = float(edge_effort(np.linalg.norm(pts[x_t] - problem.start_array), resolution))
    return branch, e_edge, d_bar


def repulsive_energy(r: np.ndarray, cfg: ApfConfig) -> np.ndarray:
    """Magnitude of one invalid sample's repulsive energy at distance ``r``."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= cfg.rho0, cfg.k_r / np.maximum(r, cfg.r_min), 0.0)


def attractive_energy(r: np.ndarray, cfg: ApfConfig) -> np.ndarray:
    return cfg.k_a / np.maximum(np.asarray(r, dtype=float), cfg.r_min)


def repulsive_force(r: float, cfg: ApfConfig) -> float:
    """Force magnitude paired with :func:`repulsive_energy` (unit charges)."""
    return cfg.k_r / max(r, cfg.r_min) ** 2 if r <= cfg.rho0 else 0.0


def attractive_force(r: float, cfg: ApfConfig) -> float:
    return cfg.k_a / max(r, cfg.r_min) ** 2


def potential_energy(
    x: np.ndarray, invalid_samples: np.ndarray, anchor: np.ndarray, cfg: ApfConfig
) -> float:
    """U[x]: attraction toward ``anchor`` plus repulsion summed over invalid samples."""
    x = np.asarray(x, dtype=float)
    u_attr = float(attractive_energy(np.linalg.norm(x - anchor), cfg))
    invalid = np.asarray(invalid_samples, dtype=float).reshape(-1, len(x))
    if len(invalid) == 0:
        return u_attr
    u_rep = float(repulsive_energy(np.linalg.norm(invalid - x, axis=1), cfg).sum())
    return u_rep + u_attr


def potential_field(
    points: np.ndarray, invalid_samples: np.ndarray, anchor: np.ndarray, cfg: ApfConfig
) -> np.ndarray:
    """:func:`potential_energy` for many points, using a k-d tree over the invalid samples."""
    points = np.asarray(points, dtype=float)
    u = attractive_energy(np.linalg.norm(points - anchor, axis=1), cfg)
    invalid = np.asarray(invalid_samples, dtype=float)
    if len(invalid) == 0 or len(points) == 0:
        return u
    pairs = cKDTree(points).sparse_distance_matrix(
        cKDTree(invalid), cfg.rho0, output_type="ndarray"
    )
    if len(pairs):
        rep = cfg.k_r / np.maximum(pairs["v"], cfg.r_min)
        u = u + np.bincount(pairs["i"], weights=rep, minlength=len(points))
    return u


def dynamic_importance(x_t: int, nbrs: Iterable[int], tree_R: "SearchTree") -> int:
    """Number of ``x_t``'s neighbours that are reverse-tree vertices."""
    return sum(1 for v in nbrs if int(v) in tree_R)
