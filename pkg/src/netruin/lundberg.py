"""Adjustment coefficients of aggregated processes and exponential upper bounds.

The aggregated group process of a realization has cumulant
``g(t) = sum_j psi_j(t * w_j)`` where ``w_j`` is the group weight-column
sum; its positive root is the realization's decay rate and always lies
between ``min_j kappa_j / w_j`` and ``max_j kappa_j / w_j``.  Replacing
weights by constant caps gives bounds that hold uniformly over the random
network, with the connection probability as prefactor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleAllocation, IsolatedGroup, NoAdjustmentCoefficient
from .model import ObjectParams, adjustment_coefficient, cumulant, rho
from .network import (
    AdjacencyRealization,
    NetworkSpec,
    degzero_probability,
    normalize_group,
    weight_caps,
)

__all__ = [
    "ExponentAllocation",
    "network_adjustment_coefficient",
    "lundberg_bound_sum",
    "lundberg_bound_joint",
    "optimize_allocation",
]

_BISECT_REL_TOL = 1e-12


@dataclass(frozen=True)
class ExponentAllocation:
    """Per-agent exponential rates for the joint bound, aligned with the sorted group."""

    group: tuple
    rates: tuple

    def __post_init__(self):
        if len(self.group) != len(self.rates):
            raise InfeasibleAllocation("one rate per group agent is required")
        if any(r <= 0 for r in self.rates):
            raise InfeasibleAllocation("rates must be strictly positive")


def _object_kappas(objects: Sequence[ObjectParams], tol: float = 1e-12) -> np.ndarray:
    return np.array([adjustment_coefficient(o, tol) for o in objects])


def network_adjustment_coefficient(
    realization: AdjacencyRealization,
    objects: Sequence[ObjectParams],
    group,
    tol: float = 1e-12,
) -> float:
    """Decay rate of the aggregated group process for one realization.

    Bisection on the aggregated cumulant within the bracket formed by the
    per-object rates divided by the group weight-column sums.
    """
    rows = normalize_group(group, realization.q)
    w = realization.weights[list(rows)].sum(axis=0)
    active = np.flatnonzero(w > 0)
    if active.size == 0:
        raise IsolatedGroup("group has no positively weighted object")
    kappas = _object_kappas(objects, tol)
    ratio = kappas[active] / w[active]
    lo, hi = float(ratio.min()), float(ratio.max())
    if hi - lo <= tol * hi:
        return 0.5 * (lo + hi)

    def g(t: float) -> float:
        total = 0.0
        for j in active:
            val = cumulant(objects[j], t * w[j])
            if math.isinf(val):
                return math.inf
            total += val
        return total

    if g(lo) > 0.0:
        return lo
    if g(hi) < 0.0:
        return hi
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def lundberg_bound_sum(
    spec: NetworkSpec,
    objects: Sequence[ObjectParams],
    group,
    barriers,
    caps=None,
) -> float:
    """Uniform upper bound on the group-sum hitting probability.

    ``P(connected) * exp(-min_j kappa_j * sum(u) / sum(caps))`` where the
    per-agent caps dominate every realizable weight (1 in the homogeneous
    scheme).
    """
    rows = normalize_group(group, spec.q)
    kappa = float(_object_kappas(objects).min())
    if caps is None:
        caps = weight_caps(spec.scheme, objects, spec.q, rows)
    caps = np.asarray(caps, dtype=float)
    if np.any(caps <= 0) or np.any(caps > 1.0 + 1e-12):
        raise InfeasibleAllocation("weight caps must lie in (0, 1]")
    total_u = float(sum(barriers[i] for i in rows))
    total_cap = float(caps[list(rows)].sum()) if caps.ndim else float(len(rows) * caps)
    p_connect = 1.0 - degzero_probability(spec, rows)
    return p_connect * math.exp(-kappa * total_u / total_cap)


def lundberg_bound_joint(
    spec: NetworkSpec,
    objects: Sequence[ObjectParams],
    group,
    barriers,
    alloc: ExponentAllocation,
) -> float:
    """Upper bound on the probability that all group agents reach their barriers.

    Feasibility requires the allocated rates to sum to at most every
    per-object decay rate.
    """
    rows = normalize_group(group, spec.q)
    if tuple(alloc.group) != rows:
        raise InfeasibleAllocation("allocation is for a different agent group")
    kappas = _object_kappas(objects)
    total_rate = float(sum(alloc.rates))
    if total_rate > kappas.min() + 1e-12:
        raise InfeasibleAllocation(
            f"allocated rates sum to {total_rate:.6g} > min kappa {kappas.min():.6g}"
        )
    exponent = sum(r * barriers[i] for r, i in zip(alloc.rates, rows))
    return (1.0 - degzero_probability(spec, rows)) * math.exp(-exponent)


def optimize_allocation(
    objects: Sequence[ObjectParams], group, barriers
) -> ExponentAllocation:
    """Split the rate budget ``min_j kappa_j`` over the group's barriers.

    Equal barriers get the symmetric split; otherwise nearly the whole
    budget goes to the largest barrier, with a tiny floor keeping every
    rate strictly positive (the objective is linear on the simplex).
    """
    rows = tuple(sorted(set(int(i) for i in group)))
    budget = float(_object_kappas(objects).min())
    us = [float(barriers[i]) for i in rows]
    n = len(rows)
    if max(us) - min(us) <= 1e-12 * max(max(us), 1.0):
        rates = [budget / n] * n
    else:
        floor = 1e-9 * budget
        rates = [floor] * n
        rates[int(np.argmax(us))] = budget * (1.0 - (n - 1) * 1e-9)
    alloc = ExponentAllocation(rows, tuple(rates))
    if sum(rates) > budget + 1e-12:
        raise NoAdjustmentCoefficient("internal allocation infeasible")
    return alloc
