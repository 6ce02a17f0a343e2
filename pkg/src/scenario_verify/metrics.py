"""Barrier-style robustness of multi-robot trajectories.

``h_g`` is the inter-robot separation margin, ``h_f`` the goal-reaching
margin, and ``rho`` combines them over a recorded trajectory:

    rho = min( max_t h_f(x_t), min_t h_g(x_t) )

so ``rho >= 0`` exactly when robots stay separated at every recorded step
and are all near their goals at some recorded step. ``literal_eq27`` swaps
the time operators (``min_t h_f``, ``max_t h_g``) and
``goal_aggregation="any"`` takes the best robot instead of the worst one
in ``h_f``.

All functions broadcast over leading batch/time axes and use only
elementwise arithmetic plus min/max, so a value computed inside a batch is
bitwise identical to the same value computed alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricParams:
    collision_radius: float = 0.15
    goal_radius: float = 0.1
    horizon: float = 30.0
    literal_eq27: bool = False
    goal_aggregation: str = "all"

    def __post_init__(self):
        for name in ("collision_radius", "goal_radius", "horizon"):
            if not getattr(self, name) > 0:
                raise MetricError(f"{name} must be positive, got {getattr(self, name)}")
        if self.goal_aggregation not in ("all", "any"):
            raise MetricError(f"goal_aggregation must be 'all' or 'any', got {self.goal_aggregation!r}")


def _positions(state) -> np.ndarray:
    poses = np.asarray(getattr(state, "poses", state), dtype=np.float64)
    return poses[..., :2]


def min_pairwise_distance(state) -> np.ndarray:
    pos = _positions(state)
    n = pos.shape[-2]
    if n < 2:
        raise MetricError("h_g undefined for fewer than two robots")
    best = None
    for i in range(n - 1):
        for j in range(i + 1, n):
            d = np.hypot(pos[..., i, 0] - pos[..., j, 0], pos[..., i, 1] - pos[..., j, 1])
            best = d if best is None else np.minimum(best, d)
    return best


def h_g(state, params: MetricParams = MetricParams()):
    """Minimum pairwise planar distance minus the collision radius."""
    out = min_pairwise_distance(state) - params.collision_radius
    return float(out) if np.ndim(out) == 0 else out


def goal_margins(state, goals) -> np.ndarray:
    pos = _positions(state)
    goals = np.asarray(goals, dtype=np.float64)
    if goals.shape[-2:] != pos.shape[-2:]:
        raise MetricError(f"goals shape {goals.shape} does not match {pos.shape[-2]} robots")
    return np.hypot(pos[..., 0] - goals[..., 0], pos[..., 1] - goals[..., 1])


def h_f(state, goals, params: MetricParams = MetricParams()):
    per_robot = params.goal_radius - goal_margins(state, goals)
    if params.goal_aggregation == "all":
        out = np.min(per_robot, axis=-1)
    else:
        out = np.max(per_robot, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _combine(hf_min, hf_max, hg_min, hg_max, params: MetricParams):
    if params.literal_eq27:
        return np.minimum(hf_min, hg_max)
    return np.minimum(hf_max, hg_min)


def rho(traj, params: MetricParams = MetricParams()) -> float:
    """Robustness of a recorded trajectory (anything with ``states`` and ``goals``)."""
    states = np.asarray(traj.states, dtype=np.float64)
    if states.shape[0] == 0:
        raise MetricError("empty trajectory")
    goals = np.broadcast_to(np.asarray(traj.goals, dtype=np.float64), states.shape[:-1] + (2,))
    hg = h_g(states, params)
    hf = h_f(states, goals, params)
    return float(_combine(np.min(hf), np.max(hf), np.min(hg), np.max(hg), params))


class RobustnessAccumulator:
    """Running version of :func:`rho` for a batch of trajectories.

    Fed one world state per step; never stores the trajectory.
    """

    def __init__(self, goals: np.ndarray, params: MetricParams):
        self.goals = np.asarray(goals, dtype=np.float64)
        self.params = params
        self.hf_min = self.hf_max = self.hg_min = self.hg_max = None

    def update(self, poses: np.ndarray) -> None:
        hg = h_g(poses, self.params)
        hf = h_f(poses, self.goals, self.params)
        if self.hg_min is None:
            self.hf_min, self.hf_max, self.hg_min, self.hg_max = hf, hf, hg, hg
        else:
            self.hf_min = np.minimum(self.hf_min, hf)
            self.hf_max = np.maximum(self.hf_max, hf)
            self.hg_min = np.minimum(self.hg_min, hg)
            self.hg_max = np.maximum(self.hg_max, hg)

    def value(self) -> np.ndarray:
        if self.hg_min is None:
            raise MetricError("empty trajectory")
        return _combine(self.hf_min, self.hf_max, self.hg_min, self.hg_max, self.params)
