"""Black-box verification by scenario bounds on sampled trajectory robustness.

A *system* is anything with an ``evaluate(seeds)`` method that, for each
seed, draws an initial condition and parameter uniformly over the admissible
set, runs the closed loop, and returns a :class:`RobustnessSample`. Sample
``i`` of a run uses stream ``i`` of the master seed, hold-out samples use a
disjoint stream namespace, so every sample is a pure function of
``(system, master, stream)`` and can be replayed on its own.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .metrics import MetricParams
from .risk_core import RiskSpec, ScenarioError, confidence_bound, required_samples, scenario_var_upper_bound
from .robot_sim import DomainSpec, SimConfig, SimulationFault, rollout, sample_initial_conditions
from .seeding import FIT_NAMESPACE, HOLDOUT_NAMESPACE, RngSeed

DEFAULT_CHUNK = 512


@dataclass(frozen=True, eq=False)
class RobustnessSample:
    r: float
    x0: np.ndarray
    theta: np.ndarray
    seed: RngSeed


@dataclass(frozen=True)
class FailureMassEstimate:
    threshold: float
    estimate: float
    n: int


@dataclass
class VerificationReport:
    epsilon: float
    gamma: float
    n_required: int
    n_used: int
    bound: float
    seed: int
    holdout_size: Optional[int]
    holdout_violation_fraction: Optional[float]
    bound_nonnegative: bool
    elapsed: Optional[float]
    samples: List[RobustnessSample] = field(default_factory=list, repr=False)
    holdout_samples: List[RobustnessSample] = field(default_factory=list, repr=False)
    qp_fallback_trajectories: int = field(default=0, repr=False)
    max_qp_residual: float = field(default=-math.inf, repr=False)

    FIELDS = (
        "epsilon",
        "gamma",
        "n_required",
        "n_used",
        "bound",
        "seed",
        "holdout_size",
        "holdout_violation_fraction",
        "bound_nonnegative",
        "elapsed",
    )

    @property
    def holdout_passed(self) -> Optional[bool]:
        if self.holdout_violation_fraction is None:
            return None
        return self.holdout_violation_fraction <= self.epsilon

    def to_dict(self, timing: bool = True) -> dict:
        d = {name: getattr(self, name) for name in self.FIELDS}
        if not timing:
            d["elapsed"] = None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        missing = [name for name in cls.FIELDS if name not in d]
        if missing:
            raise ValueError(f"report is missing fields {missing}")
        return cls(**{name: d[name] for name in cls.FIELDS})


# --- systems -----------------------------------------------------------------------


@dataclass(frozen=True)
class RobotTeamSystem:
    """The multi-robot simulator as a black box."""

    domain: DomainSpec = DomainSpec()
    sim: SimConfig = SimConfig()
    metric: MetricParams = MetricParams()

    def __post_init__(self):
        if self.sim.robot_count != self.domain.robot_count:
            raise ValueError("SimConfig and DomainSpec disagree on robot_count")

    def draw_inputs(self, seed: RngSeed):
        world, goals = sample_initial_conditions(self.domain, seed)
        return world.poses, goals

    def evaluate_with_diagnostics(self, seeds: Sequence[RngSeed]):
        """Samples plus (trajectories with a QP fallback, max QP residual)."""
        if not seeds:
            return [], 0, -math.inf
        inputs = [self.draw_inputs(s) for s in seeds]
        x0 = np.stack([p for p, _ in inputs])
        goals = np.stack([g for _, g in inputs])
        res = rollout(x0, goals, self.sim, seeds=seeds, metric=self.metric, record=False)
        samples = [
            RobustnessSample(float(res.rho[k]), x0[k], goals[k], seeds[k]) for k in range(len(seeds))
        ]
        fallbacks = sum(bool(f) for f in res.fallback_steps)
        return samples, fallbacks, float(np.max(res.max_qp_residual))

    def evaluate(self, seeds: Sequence[RngSeed]) -> List[RobustnessSample]:
        return self.evaluate_with_diagnostics(seeds)[0]

    def replay(self, sample: RobustnessSample) -> float:
        res = rollout(
            sample.x0[None], sample.theta[None], self.sim, seeds=[sample.seed], metric=self.metric, record=False
        )
        return float(res.rho[0])


@dataclass(frozen=True)
class FunctionSystem:
    """Synthetic system: ``r = robustness(x0, theta, seed)`` with inputs from ``sampler``.

    ``sampler`` maps a numpy Generator to ``(x0, theta)``. Both callables must
    be picklable for multi-process runs.
    """

    sampler: Callable[[np.random.Generator], tuple]
    robustness: Callable[[np.ndarray, np.ndarray, RngSeed], float]

    def evaluate(self, seeds: Sequence[RngSeed]) -> List[RobustnessSample]:
        out = []
        for s in seeds:
            x0, theta = self.sampler(s.generator(0))
            x0, theta = np.atleast_1d(np.asarray(x0, float)), np.atleast_1d(np.asarray(theta, float))
            try:
                r = float(self.robustness(x0, theta, s))
            except Exception as exc:
                raise SimulationFault(f"simulator fault: {exc}", x0=x0, theta=theta, seed=s) from exc
            if not math.isfinite(r):
                raise SimulationFault("non-finite robustness", x0=x0, theta=theta, seed=s)
            out.append(RobustnessSample(r, x0, theta, s))
        return out

    def replay(self, sample: RobustnessSample) -> float:
        return float(self.robustness(sample.x0, sample.theta, sample.seed))


# --- sampling ----------------------------------------------------------------------


def _evaluate_chunk(system, seeds):
    if hasattr(system, "evaluate_with_diagnostics"):
        return system.evaluate_with_diagnostics(seeds)
    return system.evaluate(seeds), 0, -math.inf


def _collect(system, seeds: List[RngSeed], chunk_size: int, workers: int):
    chunks = [seeds[i : i + chunk_size] for i in range(0, len(seeds), chunk_size)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_chunk, [system] * len(chunks), chunks))
    else:
        parts = [_evaluate_chunk(system, c) for c in chunks]
    samples = [s for part, _, _ in parts for s in part]
    fallbacks = sum(f for _, f, _ in parts)
    max_res = max((r for _, _, r in parts), default=-math.inf)
    return samples, fallbacks, max_res


def sample_robustness(
    system,
    n: int,
    seed: int,
    *,
    namespace: int = FIT_NAMESPACE,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> List[RobustnessSample]:
    """``n`` robustness samples from streams ``namespace + i`` of master ``seed``.

    Results are identical for any ``chunk_size`` and ``workers``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    seeds = [RngSeed(seed, namespace + i) for i in range(int(n))]
    return _collect(system, seeds, chunk_size, workers)[0]


def robust_lower_bound(samples, epsilon: float):
    """``(bound, confidence)``: minimum robustness and its scenario confidence.

    Computed by negating, taking the scenario upper bound, and negating back.
    """
    values = [s.r if isinstance(s, RobustnessSample) else s for s in samples]
    if not values:
        raise ScenarioError("no scenarios")
    ub = scenario_var_upper_bound(-np.asarray(values, dtype=np.float64), epsilon)
    return -ub.value, ub.confidence


def holdout_violation_fraction(
    system,
    bound: float,
    m: int,
    seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> float:
    samples = sample_robustness(
        system, m, seed, namespace=HOLDOUT_NAMESPACE, chunk_size=chunk_size, workers=workers
    )
    return violation_fraction(samples, bound)


def violation_fraction(samples, bound: float) -> float:
    r = np.array([s.r for s in samples])
    return int(np.count_nonzero(r < bound)) / r.size


def estimate_failure_mass(samples, threshold: float) -> FailureMassEstimate:
    r = np.array([s.r if isinstance(s, RobustnessSample) else s for s in samples], dtype=np.float64)
    if r.size == 0:
        raise ScenarioError("no scenarios")
    return FailureMassEstimate(float(threshold), int(np.count_nonzero(r < threshold)) / r.size, int(r.size))


def verify(
    system,
    spec: RiskSpec,
    *,
    seed: int,
    n_samples: Optional[int] = None,
    holdout_m: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> VerificationReport:
    """Plan N, sample, bound, and optionally validate on a hold-out set."""
    start = time.perf_counter()
    n_required = required_samples(spec)
    n_used = n_required if n_samples is None else int(n_samples)
    if n_used < n_required:
        raise ScenarioError(f"n_samples={n_used} is below the required {n_required}")
    if holdout_m < 0:
        raise ValueError(f"holdout size must be nonnegative, got {holdout_m}")

    fit_seeds = [RngSeed(seed, FIT_NAMESPACE + i) for i in range(n_used)]
    samples, fallbacks, max_res = _collect(system, fit_seeds, chunk_size, workers)
    bound, _ = robust_lower_bound(samples, spec.epsilon)

    holdout, l = [], None
    if holdout_m:
        hold_seeds = [RngSeed(seed, HOLDOUT_NAMESPACE + j) for j in range(holdout_m)]
        holdout, hf, hr = _collect(system, hold_seeds, chunk_size, workers)
        fallbacks += hf
        max_res = max(max_res, hr)
        l = violation_fraction(holdout, bound)

    return VerificationReport(
        epsilon=spec.epsilon,
        gamma=spec.gamma,
        n_required=n_required,
        n_used=n_used,
        bound=bound,
        seed=int(seed),
        holdout_size=holdout_m or None,
        holdout_violation_fraction=l,
        bound_nonnegative=bool(bound >= 0),
        elapsed=time.perf_counter() - start,
        samples=samples,
        holdout_samples=holdout,
        qp_fallback_trajectories=fallbacks,
        max_qp_residual=max_res,
    )


__all__ = [
    "FailureMassEstimate",
    "FunctionSystem",
    "RobotTeamSystem",
    "RobustnessSample",
    "VerificationReport",
    "confidence_bound",
    "estimate_failure_mass",
    "holdout_violation_fraction",
    "robust_lower_bound",
    "sample_robustness",
    "verify",
]
