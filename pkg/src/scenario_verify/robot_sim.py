"""Unicycle robot team with go-to-goal control and a barrier-certificate QP.

Each robot runs a saturated proportional law on its position, the team's
single-integrator commands are filtered jointly through a pairwise CBF-QP on
look-ahead points, and the result is mapped to ``(v, omega)`` and integrated
with explicit Euler.

Everything is written over a leading batch axis. A single trajectory is a
batch of one, and batch code uses only elementwise arithmetic, so a
trajectory simulated inside any batch is bitwise identical to the same
trajectory simulated alone.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .metrics import MetricParams, RobustnessAccumulator, h_g
from .qp import hildreth_pairwise, pairwise_lhs, pairwise_rows
from .seeding import RngSeed

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
WORKSPACE_X = (-1.0, 1.0)
WORKSPACE_Y = (-0.6, 0.6)
REJECTION_CAP = 10**6
REJECTION_BLOCK = 64


class SimulationFault(RuntimeError):
    """Non-finite state or other simulator breakdown; carries replay context."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


class AdmissibleSetTooThin(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    robot_count: int = 3
    dt: float = 0.05
    horizon: float = 30.0
    v_max: float = 0.2
    omega_max: float = 3.6
    lookahead: float = 0.05
    k_p: float = 1.0
    d_qp: float = 0.17
    cbf_gain: float = 100.0
    qp_tol: float = 1e-8
    qp_max_iter: int = 500
    noise_sigma: float = 0.0

    def __post_init__(self):
        if int(self.robot_count) != self.robot_count or self.robot_count < 1:
            raise ValueError(f"robot_count must be a positive integer, got {self.robot_count}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.horizon >= 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        if not self.d_qp > 0.15:
            raise ValueError(f"d_qp must exceed the 0.15 m collision radius, got {self.d_qp}")
        if not self.lookahead > 0:
            raise ValueError(f"lookahead must be positive, got {self.lookahead}")
        if not (self.v_max > 0 and self.omega_max > 0 and self.cbf_gain > 0 and self.k_p > 0):
            raise ValueError("v_max, omega_max, cbf_gain and k_p must be positive")
        if not (self.qp_tol > 0 and self.qp_max_iter >= 1):
            raise ValueError("qp_tol must be positive and qp_max_iter >= 1")
        if not self.noise_sigma >= 0:
            raise ValueError(f"noise_sigma must be nonnegative, got {self.noise_sigma}")

    @property
    def barrier_radius(self) -> float:
        """Look-ahead point separation that keeps robot centers ``d_qp`` apart."""
        return self.d_qp + 2.0 * self.lookahead

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def to_dict(self) -> dict:
        return asdict(self)


class RobotPose(NamedTuple):
    x: float
    y: float
    heading: float


class ControlInput(NamedTuple):
    v: float
    omega: float


@dataclass(frozen=True, eq=False)
class WorldState:
    poses: np.ndarray  # (N_R, 3): x, y, heading
    time: float = 0.0

    def __post_init__(self):
        poses = np.array(self.poses, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "poses", poses)

    @property
    def robot_count(self) -> int:
        return self.poses.shape[0]

    def pose(self, i: int) -> RobotPose:
        return RobotPose(*map(float, self.poses[i]))


@dataclass(eq=False)
class Trajectory:
    states: np.ndarray  # (T + 1, N_R, 3)
    goals: np.ndarray  # (N_R, 2)
    dt: float
    horizon: float
    fallback_steps: List[int] = field(default_factory=list)
    max_qp_residual: float = -math.inf

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.states.shape[0]) * self.dt

    def world(self, k: int) -> WorldState:
        return WorldState(self.states[k], time=k * self.dt)

    def __len__(self) -> int:
        return self.states.shape[0]


# --- per-step pieces, batch-shaped -------------------------------------------------


def _nominal(pos: np.ndarray, goals: np.ndarray, cfg: SimConfig) -> np.ndarray:
    ux = cfg.k_p * (goals[..., 0] - pos[..., 0])
    uy = cfg.k_p * (goals[..., 1] - pos[..., 1])
    speed = np.hypot(ux, uy)
    scale = np.where(speed > cfg.v_max, cfg.v_max / np.where(speed > 0, speed, 1.0), 1.0)
    return np.stack([ux * scale, uy * scale], axis=-1)


def _lookahead_points(poses: np.ndarray, cfg: SimConfig) -> np.ndarray:
    c, s = np.cos(poses[..., 2]), np.sin(poses[..., 2])
    return np.stack([poses[..., 0] + cfg.lookahead * c, poses[..., 1] + cfg.lookahead * s], axis=-1)


def _to_unicycle(heading: np.ndarray, u: np.ndarray, cfg: SimConfig) -> Tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(heading), np.sin(heading)
    v = c * u[..., 0] + s * u[..., 1]
    omega = (c * u[..., 1] - s * u[..., 0]) / cfg.lookahead
    return np.clip(v, -cfg.v_max, cfg.v_max), np.clip(omega, -cfg.omega_max, cfg.omega_max)


def _filter(poses: np.ndarray, nominal: np.ndarray, cfg: SimConfig):
    """Batched CBF-QP. Returns (u, fallback mask, residual per problem)."""
    B = poses.shape[0]
    if poses.shape[1] < 2:
        return nominal.copy(), np.zeros(B, dtype=bool), np.full(B, -math.inf)
    dp, b, _ = pairwise_rows(_lookahead_points(poses, cfg), cfg.barrier_radius, cfg.cbf_gain)
    u = nominal.copy()
    need = np.flatnonzero(np.any(pairwise_lhs(dp, nominal) < b, axis=1))
    fallback = np.zeros(B, dtype=bool)
    if need.size:
        solved, ok = hildreth_pairwise(nominal[need], dp[need], b[need], cfg.qp_tol, cfg.qp_max_iter)
        solved[~ok] = 0.0
        u[need] = solved
        fallback[need] = ~ok
    residual = np.max(b - pairwise_lhs(dp, u), axis=1)
    return u, fallback, residual


def _advance(poses: np.ndarray, u: np.ndarray, cfg: SimConfig, noise: Optional[np.ndarray]) -> np.ndarray:
    heading = poses[..., 2]
    v, omega = _to_unicycle(heading, u, cfg)
    x = poses[..., 0] + v * np.cos(heading) * cfg.dt
    y = poses[..., 1] + v * np.sin(heading) * cfg.dt
    if noise is not None:
        x = x + noise[..., 0] * cfg.dt
        y = y + noise[..., 1] * cfg.dt
    th = np.mod(heading + omega * cfg.dt, TWO_PI)
    th = np.where(th >= TWO_PI, 0.0, th)
    x = np.clip(x, *WORKSPACE_X)
    y = np.clip(y, *WORKSPACE_Y)
    return np.stack([x, y, th], axis=-1)


# --- public single-instance API ---------------------------------------------------


def lyapunov_controller(pose, goal, cfg: SimConfig = SimConfig()) -> np.ndarray:
    """Saturated proportional velocity ``k_p (goal - position)`` for one robot."""
    pose = np.asarray(pose, dtype=np.float64)
    return _nominal(pose[:2], np.asarray(goal, dtype=np.float64), cfg)


def si_to_unicycle(pose, si_velocity, cfg: SimConfig = SimConfig()) -> ControlInput:
    """Look-ahead-point map from a planar velocity to clamped ``(v, omega)``."""
    pose = np.asarray(pose, dtype=np.float64)
    v, omega = _to_unicycle(pose[2], np.asarray(si_velocity, dtype=np.float64), cfg)
    return ControlInput(float(v), float(omega))


def cbf_qp_filter(world: WorldState, nominal, cfg: SimConfig = SimConfig()) -> np.ndarray:
    """Minimum-deviation team velocities satisfying every pairwise barrier.

    On infeasibility the whole team is stopped and a warning logged.
    """
    nominal = np.asarray(nominal, dtype=np.float64).reshape(1, -1, 2)
    u, fallback, _ = _filter(world.poses[None], nominal, cfg)
    if fallback[0]:
        log.warning("CBF-QP infeasible at t=%s; stopping all robots", world.time)
    return u[0]


def barrier_residual(world: WorldState, velocities, cfg: SimConfig = SimConfig()) -> float:
    """Largest pairwise violation ``b - 2 dp . du`` (<= 0 when all constraints hold)."""
    dp, b, _ = pairwise_rows(_lookahead_points(world.poses, cfg), cfg.barrier_radius, cfg.cbf_gain)
    return float(np.max(b - pairwise_lhs(dp, np.asarray(velocities, dtype=np.float64))))


def step(world: WorldState, goals, cfg: SimConfig = SimConfig(), noise=None) -> WorldState:
    """One closed-loop Euler step; ``noise`` is a planar velocity disturbance (N_R, 2)."""
    poses = world.poses[None]
    goals = np.asarray(goals, dtype=np.float64).reshape(1, -1, 2)
    u, _, _ = _filter(poses, _nominal(poses[..., :2], goals, cfg), cfg)
    noise = None if noise is None else np.asarray(noise, dtype=np.float64).reshape(1, -1, 2)
    new = _advance(poses, u, cfg, noise)[0]
    if not np.all(np.isfinite(new)):
        raise SimulationFault("non-finite state after step", poses=world.poses, goals=goals[0], time=world.time)
    return WorldState(new, time=world.time + cfg.dt)


# --- batched rollout --------------------------------------------------------------


@dataclass
class RolloutResult:
    rho: Optional[np.ndarray]  # (B,)
    states: Optional[np.ndarray]  # (B, T + 1, N_R, 3)
    fallback_steps: List[List[int]]
    max_qp_residual: np.ndarray  # (B,), over non-fallback steps


def noise_for(seed: Optional[RngSeed], cfg: SimConfig) -> Optional[np.ndarray]:
    """The trajectory's whole noise sequence, (T, N_R, 2), or None when noise is off."""
    if cfg.noise_sigma == 0 or seed is None:
        return None
    rng = seed.generator(1)
    return cfg.noise_sigma * rng.standard_normal((cfg.n_steps, cfg.robot_count, 2))


def rollout(
    x0: np.ndarray,
    goals: np.ndarray,
    cfg: SimConfig,
    seeds: Optional[Sequence[Optional[RngSeed]]] = None,
    metric: Optional[MetricParams] = None,
    record: bool = True,
) -> RolloutResult:
    """Simulate a batch. ``x0`` is (B, N_R, 3), ``goals`` (B, N_R, 2)."""
    poses = np.array(x0, dtype=np.float64)
    goals = np.asarray(goals, dtype=np.float64)
    B, n, _ = poses.shape
    T = cfg.n_steps
    noise = None
    if cfg.noise_sigma > 0 and seeds is not None:
        noise = np.zeros((T, B, n, 2))
        for k, seed in enumerate(seeds):
            draws = noise_for(seed, cfg)
            if draws is not None:
                noise[:, k] = draws
    states = np.empty((B, T + 1, n, 3)) if record else None
    acc = RobustnessAccumulator(goals, metric) if metric is not None else None
    fallback_steps: List[List[int]] = [[] for _ in range(B)]
    max_res = np.full(B, -math.inf)

    for t in range(T + 1):
        if record:
            states[:, t] = poses
        if acc is not None:
            acc.update(poses)
        if t == T:
            break
        u, fallback, residual = _filter(poses, _nominal(poses[..., :2], goals, cfg), cfg)
        for k in np.flatnonzero(fallback):
            fallback_steps[k].append(t)
        max_res = np.where(fallback, max_res, np.maximum(max_res, residual))
        poses = _advance(poses, u, cfg, None if noise is None else noise[t])
        bad = ~np.all(np.isfinite(poses), axis=(1, 2))
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise SimulationFault(
                f"non-finite state at step {t + 1}",
                x0=np.asarray(x0)[k],
                goals=goals[k],
                seed=None if seeds is None else seeds[k],
                step=t + 1,
            )
    return RolloutResult(
        rho=None if acc is None else acc.value(),
        states=states,
        fallback_steps=fallback_steps,
        max_qp_residual=max_res,
    )


def simulate_trajectory(
    x0: WorldState,
    goals,
    cfg: SimConfig = SimConfig(),
    seed: Optional[RngSeed] = None,
) -> Trajectory:
    goals = np.asarray(goals, dtype=np.float64).reshape(-1, 2)
    res = rollout(x0.poses[None], goals[None], cfg, seeds=[seed])
    return Trajectory(
        states=res.states[0],
        goals=goals,
        dt=cfg.dt,
        horizon=cfg.horizon,
        fallback_steps=res.fallback_steps[0],
        max_qp_residual=float(res.max_qp_residual[0]),
    )


# --- initial conditions -----------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """Admissible initial poses and goals: pairwise margin ``h_g >= min_separation``."""

    robot_count: int = 3
    min_separation: float = 0.3
    x_bounds: Tuple[float, float] = WORKSPACE_X
    y_bounds: Tuple[float, float] = WORKSPACE_Y
    metric: MetricParams = MetricParams()

    def __post_init__(self):
        if int(self.robot_count) != self.robot_count or self.robot_count < 2:
            raise ValueError(f"robot_count must be >= 2, got {self.robot_count}")
        if not (self.x_bounds[0] < self.x_bounds[1] and self.y_bounds[0] < self.y_bounds[1]):
            raise ValueError("empty workspace box")

    @property
    def parameter_dim(self) -> int:
        return 2 * self.robot_count

    def admissible(self, positions) -> bool:
        return bool(h_g(np.asarray(positions)[None], self.metric)[0] >= self.min_separation)


def _rejection_positions(domain: DomainSpec, rng: np.random.Generator) -> np.ndarray:
    n = domain.robot_count
    lo = np.array([domain.x_bounds[0], domain.y_bounds[0]])
    hi = np.array([domain.x_bounds[1], domain.y_bounds[1]])
    tried = 0
    while tried < REJECTION_CAP:
        block = rng.uniform(lo, hi, size=(REJECTION_BLOCK, n, 2))
        ok = np.flatnonzero(h_g(block, domain.metric) >= domain.min_separation)
        if ok.size:
            return block[ok[0]]
        tried += REJECTION_BLOCK
    raise AdmissibleSetTooThin(
        f"admissible set too thin: no admissible draw in {REJECTION_CAP} tries for {n} robots"
    )


def sample_initial_conditions(domain: DomainSpec, seed: RngSeed) -> Tuple[WorldState, np.ndarray]:
    """Uniform admissible start poses and goals, by rejection from the workspace box."""
    rng = seed.generator(0)
    start = _rejection_positions(domain, rng)
    headings = rng.uniform(0.0, TWO_PI, size=domain.robot_count)
    goals = _rejection_positions(domain, rng)
    return WorldState(np.column_stack([start, headings])), goals
