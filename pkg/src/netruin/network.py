"""Bipartite agent-object networks: specification, weights, sampling, enumeration.

A network links ``q`` agents to ``d`` objects through independent edges
with probabilities ``p[i, j]``.  A realization is a 0/1 indicator matrix
together with a weight matrix ``A[i, j] = indicator[i, j] * W[i, j]``
whose object columns must sum to at most 1, so that no object is
over-allocated.  Weight schemes determine ``W`` from the indicator matrix
(and, for the exponential scheme, from the queried agent group).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyAgentSet,
    EnumerationTooLarge,
    WeightConstraintViolated,
)
from .model import ObjectParams

__all__ = [
    "Homogeneous",
    "ExponentialSystem",
    "InverseExpectedLoss",
    "InverseDrift",
    "CustomDeterministic",
    "WeightScheme",
    "NetworkSpec",
    "AdjacencyRealization",
    "DegreeSummary",
    "normalize_group",
    "degrees",
    "apply_weights",
    "sample",
    "enumerate_realizations",
    "degzero_probability",
    "connect_probabilities",
    "weight_caps",
]

_COLUMN_TOL = 1e-12
MAX_FREE_EDGES = 22


@dataclass(frozen=True)
class Homogeneous:
    """Each object split equally among its connected agents: 1/deg(j)."""


@dataclass(frozen=True)
class ExponentialSystem:
    """Group exposure inversely proportional to the object's mean jump size.

    ``rate`` is the common scale constant of the group weights; when left
    as ``None`` it defaults to ``min_j mean_j / (q - |group| + 1)``, the
    largest constant that keeps every object column sum at most 1 for
    every possible indicator realization.
    """

    rate: float | None = None

    def resolved_rate(self, objects, q: int, group_size: int) -> float:
        if self.rate is not None:
            return self.rate
        min_mean = min(o.jump.mean for o in objects)
        return min_mean / (q - group_size + 1)


@dataclass(frozen=True)
class InverseExpectedLoss:
    """Deterministic weights k / (lambda_j * mean_j); small expected loss is attractive."""

    k: float | None = None

    def resolved_k(self, objects, q: int) -> float:
        if self.k is not None:
            return self.k
        return min(o.lam * o.jump.mean for o in objects) / q


@dataclass(frozen=True)
class InverseDrift:
    """Deterministic weights 1 / c_j."""


@dataclass(frozen=True)
class CustomDeterministic:
    """Explicit deterministic weight matrix, one entry per (agent, object)."""

    weights: tuple

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 2:
            raise DimensionMismatch("custom weights must be a 2-d matrix")
        if np.any((w < 0) | (w > 1)):
            raise ValueError("custom weights must lie in [0, 1]")
        object.__setattr__(self, "weights", tuple(map(tuple, w.tolist())))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


WeightScheme = Union[
    Homogeneous, ExponentialSystem, InverseExpectedLoss, InverseDrift, CustomDeterministic
]


@dataclass(frozen=True)
class NetworkSpec:
    """Independent-edge bipartite network with a weight scheme."""

    edge_prob: tuple
    scheme: WeightScheme

    def __init__(self, edge_prob, scheme: WeightScheme):
        p = np.asarray(edge_prob, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise DimensionMismatch("edge_prob must be a q x d matrix")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("edge probabilities must lie in [0, 1]")
        object.__setattr__(self, "edge_prob", tuple(map(tuple, p.tolist())))
        object.__setattr__(self, "scheme", scheme)

    @property
    def prob_matrix(self) -> np.ndarray:
        return np.asarray(self.edge_prob, dtype=float)

    @property
    def q(self) -> int:
        return len(self.edge_prob)

    @property
    def d(self) -> int:
        return len(self.edge_prob[0])

    @classmethod
    def bernoulli(cls, q: int, d: int, p: float, scheme: WeightScheme) -> "NetworkSpec":
        return cls(np.full((q, d), float(p)), scheme)

    @classmethod
    def complete(cls, q: int, d: int, scheme: WeightScheme) -> "NetworkSpec":
        return cls(np.ones((q, d)), scheme)


@dataclass(frozen=True)
class AdjacencyRealization:
    """One realized network: indicator matrix, weights, optional mass."""

    indicator: np.ndarray
    weights: np.ndarray
    probability: float | None = None

    @property
    def q(self) -> int:
        return self.indicator.shape[0]

    @property
    def d(self) -> int:
        return self.indicator.shape[1]


class DegreeSummary(NamedTuple):
    agent_degrees: np.ndarray
    object_degrees: np.ndarray
    group_degree: int
    group_flags: np.ndarray  # per object: is any group agent connected


def normalize_group(group, q: int) -> tuple:
    """Validate an agent group and return it as a sorted tuple of indices."""
    idx = tuple(sorted(set(int(i) for i in group)))
    if not idx:
        raise EmptyAgentSet("agent group must be nonempty")
    if idx[0] < 0 or idx[-1] >= q:
        raise DimensionMismatch(f"agent indices {idx} outside range 0..{q - 1}")
    return idx


def degrees(realization, group) -> DegreeSummary:
    """Agent/object degrees, total group degree and per-object group flags."""
    ind = realization.indicator if isinstance(realization, AdjacencyRealization) else realization
    ind = np.asarray(ind)
    rows = normalize_group(group, ind.shape[0])
    agent_deg = ind.sum(axis=1)
    object_deg = ind.sum(axis=0)
    flags = ind[list(rows)].any(axis=0)
    return DegreeSummary(agent_deg, object_deg, int(agent_deg[list(rows)].sum()), flags)


def apply_weights(
    indicator, scheme: WeightScheme, objects: Sequence[ObjectParams], group
) -> np.ndarray:
    """Weight matrix for one indicator realization under a scheme.

    Raises :class:`WeightConstraintViolated` when some object column of the
    resulting matrix sums above 1.
    """
    ind = np.asarray(indicator, dtype=float)
    q, d = ind.shape
    rows = normalize_group(group, q)
    if len(objects) != d:
        raise DimensionMismatch("objects list does not match indicator columns")

    if isinstance(scheme, Homogeneous):
        deg = ind.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(ind > 0, 1.0 / np.where(deg > 0, deg, 1.0), 0.0)
    elif isinstance(scheme, ExponentialSystem):
        r = scheme.resolved_rate(objects, q, len(rows))
        deg_q = ind[list(rows)].sum(axis=0)
        mu = np.array([o.jump.mean for o in objects])
        col = np.where(deg_q > 0, r / (np.where(deg_q > 0, deg_q, 1.0) * mu), 0.0)
        w = ind * col[None, :]
    elif isinstance(scheme, InverseExpectedLoss):
        k = scheme.resolved_k(objects, q)
        lm = np.array([o.lam * o.jump.mean for o in objects])
        w = ind * (k / lm)[None, :]
    elif isinstance(scheme, InverseDrift):
        c = np.array([o.drift for o in objects])
        w = ind * (1.0 / c)[None, :]
    elif isinstance(scheme, CustomDeterministic):
        mat = scheme.matrix
        if mat.shape != ind.shape:
            raise DimensionMismatch("custom weight matrix shape mismatch")
        w = ind * mat
    else:
        raise TypeError(f"unknown weight scheme {type(scheme).__name__}")

    col_sums = w.sum(axis=0)
    if np.any(col_sums > 1.0 + _COLUMN_TOL):
        j = int(np.argmax(col_sums))
        raise WeightConstraintViolated(
            f"object column {j} sums to {col_sums[j]:.6g} > 1"
        )
    return w


def sample(
    spec: NetworkSpec,
    objects: Sequence[ObjectParams],
    group,
    rng: Union[int, np.random.Generator],
) -> AdjacencyRealization:
    """Draw one realization: independent Bernoulli edges plus scheme weights."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    p = spec.prob_matrix
    ind = (gen.random(p.shape) < p).astype(np.int8)
    w = apply_weights(ind, spec.scheme, objects, group)
    return AdjacencyRealization(ind, w)


def _edge_slots(spec: NetworkSpec):
    """Split edge slots into free (0 < p < 1) and forced-on ones."""
    p = spec.prob_matrix
    free = [(i, j) for i in range(spec.q) for j in range(spec.d) if 0.0 < p[i, j] < 1.0]
    forced = [(i, j) for i in range(spec.q) for j in range(spec.d) if p[i, j] == 1.0]
    return free, forced


def enumerate_realizations(
    spec: NetworkSpec,
    objects: Sequence[ObjectParams],
    group,
    max_free_edges: int = MAX_FREE_EDGES,
):
    """Yield every realization with its probability, in a fixed bit order.

    Edge slots with probability exactly 0 or 1 are treated as forced and do
    not enter the enumeration exponent.  Probabilities multiply independent
    Bernoulli masses and sum to 1.
    """
    free, forced = _edge_slots(spec)
    if len(free) > max_free_edges:
        raise EnumerationTooLarge(
            f"{len(free)} free edge slots exceed the cap of {max_free_edges}"
        )
    p = spec.prob_matrix
    base = np.zeros((spec.q, spec.d), dtype=np.int8)
    for i, j in forced:
        base[i, j] = 1
    for code in range(1 << len(free)):
        ind = base.copy()
        prob = 1.0
        for k, (i, j) in enumerate(free):
            if (code >> k) & 1:
                ind[i, j] = 1
                prob *= p[i, j]
            else:
                prob *= 1.0 - p[i, j]
        w = apply_weights(ind, spec.scheme, objects, group)
        yield AdjacencyRealization(ind, w, prob), prob


def degzero_probability(spec: NetworkSpec, group) -> float:
    """P(deg(group) = 0) = product of (1 - p) over the group's edge slots."""
    rows = normalize_group(group, spec.q)
    p = spec.prob_matrix[list(rows)]
    return float(np.prod(1.0 - p))


def connect_probabilities(spec: NetworkSpec, group) -> np.ndarray:
    """Per object: probability that at least one group agent connects to it."""
    rows = normalize_group(group, spec.q)
    p = spec.prob_matrix[list(rows)]
    return 1.0 - np.prod(1.0 - p, axis=0)


def resolve_scheme(
    scheme: WeightScheme, objects: Sequence[ObjectParams], q: int, group_size: int
) -> WeightScheme:
    """Pin defaulted scheme constants so later per-column work sees fixed values."""
    if isinstance(scheme, ExponentialSystem) and scheme.rate is None:
        return ExponentialSystem(scheme.resolved_rate(objects, q, group_size))
    if isinstance(scheme, InverseExpectedLoss) and scheme.k is None:
        return InverseExpectedLoss(scheme.resolved_k(objects, q))
    return scheme


def weight_caps(
    scheme: WeightScheme, objects: Sequence[ObjectParams], q: int, group
) -> np.ndarray:
    """Per-agent constants bounding every realizable weight from above.

    Individual weights always lie in [0, 1], so caps are clipped at 1.
    """
    rows = normalize_group(group, q)
    if isinstance(scheme, Homogeneous):
        caps = np.ones(q)
    elif isinstance(scheme, ExponentialSystem):
        r = scheme.resolved_rate(objects, q, len(rows))
        caps = np.full(q, r / min(o.jump.mean for o in objects))
    elif isinstance(scheme, InverseExpectedLoss):
        k = scheme.resolved_k(objects, q)
        caps = np.full(q, k / min(o.lam * o.jump.mean for o in objects))
    elif isinstance(scheme, InverseDrift):
        caps = np.full(q, 1.0 / min(o.drift for o in objects))
    elif isinstance(scheme, CustomDeterministic):
        caps = scheme.matrix.max(axis=1)
    else:
        raise TypeError(f"unknown weight scheme {type(scheme).__name__}")
    return np.minimum(caps, 1.0)
