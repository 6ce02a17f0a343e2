"""Benchmark scalar distributions, seeded sampling, and the empirical VaR oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .risk_core import SampleLike, SampleSet, ScenarioError, as_sample_set, scenario_var_upper_bound
from .seeding import ORACLE_STREAM, RngSeed


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise DistributionError(f"Uniform requires finite a < b, got ({self.a}, {self.b})")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.a, self.b, n)


@dataclass(frozen=True)
class Gaussian:
    mean: float
    stddev: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.stddev) and self.stddev > 0):
            raise DistributionError(f"Gaussian requires stddev > 0, got {self.stddev}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.stddev, n)


def _check_dof(name: str, dof) -> None:
    if isinstance(dof, bool) or int(dof) != dof or dof < 1:
        raise DistributionError(f"{name} requires an integer dof >= 1, got {dof}")


@dataclass(frozen=True)
class ChiSquared:
    dof: int

    def __post_init__(self):
        _check_dof("ChiSquared", self.dof)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.chisquare(int(self.dof), n)


@dataclass(frozen=True)
class Chi:
    """Square root of a chi-squared variable (the non-squared reading of chi(k))."""

    dof: int

    def __post_init__(self):
        _check_dof("Chi", self.dof)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.sqrt(rng.chisquare(int(self.dof), n))


@dataclass(frozen=True)
class PointMass:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DistributionError(f"PointMass requires a finite value, got {self.value}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.full(n, float(self.value))


@dataclass(frozen=True)
class Mixture:
    weights: Tuple[float, ...]
    components: Tuple["DistributionSpec", ...]

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        components = tuple(self.components)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)
        if not weights or len(weights) != len(components):
            raise DistributionError("Mixture needs one weight per component")
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise DistributionError(f"Mixture weights must be nonnegative, got {weights}")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise DistributionError(f"Mixture weights must sum to 1, got {math.fsum(weights)}")
        for c in components:
            if not hasattr(c, "draw"):
                raise DistributionError(f"not a distribution: {c!r}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        labels = rng.choice(len(self.components), size=n, p=np.asarray(self.weights))
        out = np.empty(n)
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = comp.draw(rng, idx.size)
        return out


DistributionSpec = Union[Uniform, Gaussian, ChiSquared, Chi, PointMass, Mixture]

# Multi-modal demonstration distribution.
BIMODAL = Mixture((0.5, 0.5), (Gaussian(-2.0, 0.5), Gaussian(3.0, 1.0)))


def parse_distribution(text: str) -> DistributionSpec:
    """Parse ``kind:p1,p2`` strings such as ``uniform:-1,1`` or ``chi2:2``.

    Mixtures are written ``mixture:w1@<dist>;w2@<dist>``; ``bimodal`` names
    the built-in two-component example.
    """
    text = text.strip()
    if text == "bimodal":
        return BIMODAL
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "mixture":
            weights, comps = [], []
            for part in rest.split(";"):
                w, _, sub = part.partition("@")
                weights.append(float(w))
                comps.append(parse_distribution(sub))
            return Mixture(tuple(weights), tuple(comps))
        args = [float(p) for p in rest.split(",")] if rest.strip() else []
        if kind == "uniform":
            return Uniform(*args)
        if kind in ("gaussian", "normal"):
            return Gaussian(*args)
        if kind in ("chi2", "chisquared"):
            return ChiSquared(int(args[0]))
        if kind == "chi":
            return Chi(int(args[0]))
        if kind in ("point", "pointmass"):
            return PointMass(*args)
    except (TypeError, IndexError, ValueError) as exc:
        raise DistributionError(f"cannot parse distribution {text!r}: {exc}") from exc
    raise DistributionError(f"unknown distribution kind {kind!r}")


def sample(dist: DistributionSpec, n: int, seed: RngSeed) -> SampleSet:
    if int(n) != n or n < 1:
        raise DistributionError(f"sample count must be >= 1, got {n}")
    values = dist.draw(seed.generator(), int(n))
    return SampleSet(values, seed=seed)


def empirical_var(samples: SampleLike, epsilon: float) -> float:
    """Smallest sample value ``v`` with ``#{x <= v} / N >= 1 - epsilon``."""
    samples = as_sample_set(samples)
    epsilon = float(epsilon)
    if not 0.0 <= epsilon < 1.0:
        raise ScenarioError(f"epsilon must lie in [0, 1), got {epsilon}")
    ordered = np.sort(samples.values)
    n = ordered.size
    target = 1.0 - epsilon
    # index k covers at least k + 1 samples; ties only add mass
    k = min(n - 1, max(0, math.ceil(target * n) - 1))
    while k > 0 and k / n >= target:
        k -= 1
    while (k + 1) / n < target:
        k += 1
    return float(ordered[k])


@dataclass(frozen=True)
class GapResult:
    gaps: np.ndarray
    oracle_var: float
    bounds: np.ndarray

    @property
    def min_gap(self) -> float:
        return float(np.min(self.gaps))

    @property
    def negatives(self) -> int:
        return int(np.count_nonzero(self.gaps < 0))


def var_gap_trial(
    dist: DistributionSpec,
    epsilon: float,
    n_scenario: int,
    n_oracle: int,
    trials: int,
    seed: RngSeed,
) -> GapResult:
    """Scenario bounds from independent trials minus one empirical VaR estimate.

    Trial ``i`` draws from stream ``i`` of ``seed.master``; the oracle uses a
    reserved stream so it never overlaps a trial.
    """
    for name, value in (("n_scenario", n_scenario), ("n_oracle", n_oracle), ("trials", trials)):
        if int(value) != value or value < 1:
            raise DistributionError(f"{name} must be >= 1, got {value}")
    oracle = empirical_var(sample(dist, n_oracle, RngSeed(seed.master, ORACLE_STREAM)), epsilon)
    bounds = np.array(
        [
            scenario_var_upper_bound(sample(dist, n_scenario, RngSeed(seed.master, i)), epsilon).value
            for i in range(int(trials))
        ]
    )
    return GapResult(gaps=bounds - oracle, oracle_var=oracle, bounds=bounds)
