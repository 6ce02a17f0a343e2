"""Scenario upper bounds on Value-at-Risk and the matching sample-size planner.

The scenario program ``min z s.t. z >= x_i`` for a scalar decision has the
sample maximum as its unique solution, so no LP solver is involved. With
``N`` samples the maximum upper-bounds ``VaR_eps`` with probability at
least ``1 - (1 - eps)**N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .seeding import RngSeed


class ScenarioError(ValueError):
    """Invalid input to a scenario computation."""


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:  # also rejects NaN
        raise ScenarioError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class RiskSpec:
    epsilon: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_probability("epsilon", self.epsilon))
        object.__setattr__(self, "gamma", _check_probability("gamma", self.gamma))

    @property
    def n_required(self) -> int:
        return required_samples(self)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Finite, nonempty collection of finite scalar observations."""

    values: np.ndarray
    seed: Optional[RngSeed] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise ScenarioError("no scenarios")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ScenarioError(f"invalid sample at index {bad}: {values[bad]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size


SampleLike = Union[SampleSet, Sequence[float], np.ndarray]


def as_sample_set(samples: SampleLike) -> SampleSet:
    return samples if isinstance(samples, SampleSet) else SampleSet(samples)


@dataclass(frozen=True)
class ScenarioBound:
    value: float
    n_samples: int
    epsilon: float
    confidence: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "n": self.n_samples,
            "epsilon": self.epsilon,
            "confidence": self.confidence,
        }


def confidence_bound(n: int, epsilon: float) -> float:
    """Lower bound ``1 - (1 - epsilon)**n`` on P(max of n samples >= VaR_epsilon)."""
    if int(n) != n or n < 1:
        raise ScenarioError(f"degenerate sample count: {n}")
    epsilon = _check_probability("epsilon", epsilon)
    return 1.0 - (1.0 - epsilon) ** int(n)


def scenario_var_upper_bound(samples: SampleLike, epsilon: float) -> ScenarioBound:
    samples = as_sample_set(samples)
    epsilon = _check_probability("epsilon", epsilon)
    n = samples.n
    return ScenarioBound(
        value=float(np.max(samples.values)),
        n_samples=n,
        epsilon=epsilon,
        confidence=confidence_bound(n, epsilon),
    )


def _open_interval(spec: RiskSpec) -> None:
    if not (0.0 < spec.epsilon < 1.0 and 0.0 < spec.gamma < 1.0):
        raise ScenarioError(
            f"degenerate risk spec: need 0 < epsilon < 1 and 0 < gamma < 1, "
            f"got epsilon={spec.epsilon}, gamma={spec.gamma}"
        )


def required_samples(spec: RiskSpec) -> int:
    """Smallest N with ``confidence_bound(N, eps) >= gamma``."""
    _open_interval(spec)
    eps, gamma = spec.epsilon, spec.gamma
    n = max(1, math.ceil(math.log(1.0 - gamma) / math.log1p(-eps)))
    # the real-valued bound can land a step off either way in floating point
    while n > 1 and confidence_bound(n - 1, eps) >= gamma:
        n -= 1
    while confidence_bound(n, eps) < gamma:
        n += 1
    return n


def epsilon_for(n: int, gamma: float) -> float:
    """Smallest risk level reaching confidence ``gamma`` with ``n`` samples."""
    if int(n) != n or n < 1:
        raise ScenarioError(f"degenerate sample count: {n}")
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ScenarioError(f"gamma must lie in (0, 1), got {gamma}")
    n = int(n)
    ok = lambda e: confidence_bound(n, e) >= gamma  # noqa: E731
    # closed form, then bisect over float bit patterns to absorb rounding
    guess = min(1.0, max(0.0, -math.expm1(math.log1p(-gamma) / n)))
    hi = guess
    step = 1e-12
    while not ok(hi):
        hi = min(1.0, guess + step)
        step *= 2.0
    lo = guess
    step = 1e-12
    while lo > 0.0 and ok(lo):
        lo = max(0.0, guess - step)
        step *= 2.0
    if ok(lo):
        return lo
    lo_bits, hi_bits = _bits(lo), _bits(hi)
    while hi_bits - lo_bits > 1:
        mid = (lo_bits + hi_bits) // 2
        if ok(_from_bits(mid)):
            hi_bits = mid
        else:
            lo_bits = mid
    return _from_bits(hi_bits)


def _bits(x: float) -> int:
    return int(np.float64(x).view(np.int64))


def _from_bits(b: int) -> float:
    return float(np.int64(b).view(np.float64))
