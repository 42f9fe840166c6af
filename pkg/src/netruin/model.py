"""Single-object compound Poisson primitives.

Each object carries a spectrally positive compound Poisson process
``V(t) = sum_{k<=N(t)} X_k - c t`` with Poisson arrival rate ``lambda``,
positive i.i.d. jumps ``X_k`` and drift ``c > 0``.  This module holds the
jump-size laws, the per-object load ``rho = lambda * mean / c``, the
classical exponential-jump hitting probability and the adjustment
coefficient (the positive root of the cumulant of ``V(1)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DivergentMoment, NoAdjustmentCoefficient

__all__ = [
    "Exponential",
    "Erlang",
    "Deterministic",
    "Empirical",
    "JumpLaw",
    "ObjectParams",
    "rho",
    "classic_hitting_exponential",
    "adjustment_coefficient",
    "cumulant",
    "mgf_sup",
]

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class Exponential:
    """Exponential jump sizes with the given mean."""

    mean: float

    def __post_init__(self):
        if self.mean <= 0:
            raise ValueError("exponential mean must be positive")

    def tail(self, z):
        """Survival function P(X > z)."""
        z = np.asarray(z, dtype=float)
        return np.where(z < 0, 1.0, np.exp(-np.maximum(z, 0.0) / self.mean))

    def mgf(self, t: float) -> float:
        if t >= 1.0 / self.mean:
            return math.inf
        return 1.0 / (1.0 - t * self.mean)

    @property
    def mgf_sup(self) -> float:
        return 1.0 / self.mean

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return -self.mean * np.log1p(-rng.random(size))

    def sample_from_uniform(self, u: np.ndarray) -> np.ndarray:
        return -self.mean * np.log1p(-np.asarray(u))


@dataclass(frozen=True)
class Erlang:
    """Erlang jump sizes: ``shape`` exponential stages, total mean ``mean``."""

    shape: int
    mean: float

    def __post_init__(self):
        if self.shape < 1 or self.shape != int(self.shape):
            raise ValueError("Erlang shape must be a positive integer")
        if self.mean <= 0:
            raise ValueError("Erlang mean must be positive")

    @property
    def rate(self) -> float:
        """Per-stage rate; the MGF diverges at this point."""
        return self.shape / self.mean

    def tail(self, z):
        from scipy import stats

        z = np.asarray(z, dtype=float)
        return stats.gamma.sf(np.maximum(z, 0.0), a=self.shape, scale=1.0 / self.rate)

    def mgf(self, t: float) -> float:
        if t >= self.rate:
            return math.inf
        return (self.rate / (self.rate - t)) ** self.shape

    @property
    def mgf_sup(self) -> float:
        return self.rate

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sample_from_uniform(rng.random(size))

    def sample_from_uniform(self, u: np.ndarray) -> np.ndarray:
        from scipy import stats

        return stats.gamma.ppf(np.asarray(u), a=self.shape, scale=1.0 / self.rate)


@dataclass(frozen=True)
class Deterministic:
    """All jumps equal to ``value``."""

    value: float

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("deterministic jump must be positive")

    @property
    def mean(self) -> float:
        return self.value

    def tail(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(z < self.value, 1.0, 0.0)

    def mgf(self, t: float) -> float:
        return math.exp(t * self.value)

    @property
    def mgf_sup(self) -> float:
        return math.inf

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        rng.random(size)  # keep stream alignment with the other laws
        return np.full(size, self.value)

    def sample_from_uniform(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), self.value)


@dataclass(frozen=True)
class Empirical:
    """Lattice jump law: ``masses[k]`` is the probability of ``(k+1)*step``.

    The support starts at ``step`` so that jumps are strictly positive.
    """

    step: float
    masses: tuple = field(default=())

    def __init__(self, step: float, masses: Sequence[float]):
        if step <= 0:
            raise ValueError("lattice step must be positive")
        m = np.asarray(masses, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a nonempty 1-d sequence")
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        if abs(m.sum() - 1.0) > _MASS_TOL:
            raise ValueError("masses must sum to 1 within 1e-12")
        object.__setattr__(self, "step", float(step))
        object.__setattr__(self, "masses", tuple(m.tolist()))

    @property
    def support(self) -> np.ndarray:
        return self.step * np.arange(1, len(self.masses) + 1)

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.masses))

    def tail(self, z):
        z = np.asarray(z, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        # P(X > z) = 1 - F(z); F piecewise constant, jumps at support points
        idx = np.clip(np.floor(z / self.step + 1e-12).astype(int), 0, len(self.masses))
        return np.where(z < 0, 1.0, 1.0 - cum[idx])

    def mgf(self, t: float) -> float:
        return float(np.dot(np.exp(t * self.support), self.masses))

    @property
    def mgf_sup(self) -> float:
        return math.inf

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sample_from_uniform(rng.random(size))

    def sample_from_uniform(self, u: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.masses)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, np.asarray(u), side="right")
        idx = np.clip(idx, 0, len(self.masses) - 1)
        return self.support[idx]


JumpLaw = Union[Exponential, Erlang, Deterministic, Empirical]


@dataclass(frozen=True)
class ObjectParams:
    """Arrival rate, jump law and drift of one object's process."""

    lam: float
    jump: JumpLaw
    drift: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("arrival rate must be positive")
        if self.drift <= 0:
            raise ValueError("drift must be positive")
        if not math.isfinite(self.jump.mean):
            raise ValueError("jump mean must be finite")


def rho(obj: ObjectParams) -> float:
    """Load of one object: mean inflow per unit outflow, lambda*mean/c."""
    return obj.lam * obj.jump.mean / obj.drift


def classic_hitting_exponential(rho_value: float, mu: float, u: float) -> float:
    """Hitting probability of level ``u`` for exponential jumps with mean ``mu``.

    Returns ``rho * exp(-u (1-rho)/mu)`` for ``rho < 1`` and 1 otherwise.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if rho_value >= 1.0:
        return 1.0
    return rho_value * math.exp(-u * (1.0 - rho_value) / mu)


def mgf_sup(law: JumpLaw) -> float:
    """Divergence point of the jump-size MGF (may be +inf)."""
    return law.mgf_sup


def cumulant(obj: ObjectParams, t: float) -> float:
    """Cumulant ``log E exp(t V(1)) = lam (M(t) - 1) - c t`` of the object's process.

    Returns ``+inf`` at or beyond the MGF divergence point so that root
    bracketing can treat the boundary uniformly.
    """
    if t >= obj.jump.mgf_sup:
        return math.inf
    m = obj.jump.mgf(t)
    if not math.isfinite(m):
        return math.inf
    return obj.lam * (m - 1.0) - obj.drift * t


def adjustment_coefficient(obj: ObjectParams, tol: float = 1e-12) -> float:
    """Positive root of the object's cumulant, the Lundberg decay rate.

    The cumulant is convex with value 0 and negative slope at 0 whenever
    ``rho < 1``, so the positive root is unique.  Bisection runs on
    ``[eps, t_max)`` where ``t_max`` is the MGF divergence point; for laws
    with ``t_max = +inf`` the bracket is grown by doubling.
    """
    r = rho(obj)
    if r >= 1.0:
        raise NoAdjustmentCoefficient(
            f"rho = {r:.6g} >= 1: no positive root of the cumulant exists"
        )
    t_max = obj.jump.mgf_sup
    if math.isfinite(t_max):
        hi = t_max * (1.0 - 1e-14)
        if cumulant(obj, hi) <= 0.0:
            raise DivergentMoment(
                "cumulant stays nonpositive up to the MGF divergence point"
            )
    else:
        hi = 1.0 / obj.jump.mean
        for _ in range(200):
            if cumulant(obj, hi) > 0.0:
                break
            hi *= 2.0
        else:
            raise DivergentMoment("no sign change found while expanding bracket")
    lo = 0.0
    # invariant: cumulant(lo) <= 0 < cumulant(hi)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if cumulant(obj, mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
