"""Analytic hitting probabilities for agent groups, by network conditioning.

For each network realization the aggregated group process is a one-
dimensional compound Poisson process, so its hitting probability of the
summed barrier is a compound geometric tail with the realization's load
and ladder-height law; averaging over realizations gives the group value.
Realizations whose load is at least 1 hit almost surely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EnumerationTooLarge, ModelMismatch
from .model import Exponential, ObjectParams, rho
from .network import (
    ExponentialSystem,
    NetworkSpec,
    connect_probabilities,
    degzero_probability,
    enumerate_realizations,
    normalize_group,
    resolve_scheme,
)
from .series import SeriesValue, compound_geometric_tail, integrated_tail_from_weights

__all__ = [
    "HittingQuery",
    "HittingResult",
    "hitting_sum",
    "hitting_single",
    "hitting_sum_exponential_system",
    "hitting_equal_rho",
]


@dataclass(frozen=True)
class HittingQuery:
    """A barrier-hitting question about one agent group."""

    spec: NetworkSpec
    objects: tuple
    group: tuple
    barriers: tuple
    tol: float = 1e-6

    def __init__(self, spec, objects, group, barriers, tol: float = 1e-6):
        objects = tuple(objects)
        group = normalize_group(group, spec.q)
        barriers = tuple(float(b) for b in barriers)
        if len(barriers) != spec.q:
            raise ModelMismatch("barriers must list one level per agent")
        if len(objects) != spec.d:
            raise ModelMismatch("objects must list one entry per network object")
        if any(b < 0 for b in barriers):
            raise ModelMismatch("barriers must be nonnegative")
        if sum(barriers[i] for i in group) <= 0:
            raise ModelMismatch("the group's barriers must not all be zero")
        if tol <= 0:
            raise ModelMismatch("tol must be positive")
        for name, value in (
            ("spec", spec), ("objects", objects), ("group", group),
            ("barriers", barriers), ("tol", tol),
        ):
            object.__setattr__(self, name, value)

    @property
    def total_barrier(self) -> float:
        return sum(self.barriers[i] for i in self.group)


@dataclass(frozen=True)
class HittingResult:
    value: float
    error_bound: float
    mass_at_certain_hit: float
    method: str = "exact"
    decomposition: tuple | None = None
    lower_bound: float | None = None
    upper_bound: float | None = None

    def __post_init__(self):
        if not -1e-9 <= self.value <= 1.0 + 1e-9:
            raise ValueError("hitting probability must lie in [0, 1]")


def hitting_sum(
    query: HittingQuery,
    force_lattice: bool = False,
    collect_decomposition: bool = False,
) -> HittingResult:
    """Probability that the group's summed process ever reaches the summed barrier.

    Enumerates network realizations; distinct realizations sharing the same
    weight-column sums share one series evaluation.  Non-enumerable
    networks are delegated to the Monte Carlo estimator and the result is
    flagged ``method="mc"``.
    """
    try:
        return _hitting_sum_exact(query, force_lattice, collect_decomposition)
    except EnumerationTooLarge:
        return _hitting_sum_mc(query)


def _hitting_sum_exact(query, force_lattice, collect_decomposition) -> HittingResult:
    spec, objects, group = query.spec, query.objects, query.group
    total_u = query.total_barrier
    value = 0.0
    error = 0.0
    certain = 0.0
    cache: dict = {}
    parts = [] if collect_decomposition else None
    lm = np.array([o.lam * o.jump.mean for o in objects])
    c = np.array([o.drift for o in objects])
    for real, prob in enumerate_realizations(spec, objects, group):
        w = real.weights[list(group)].sum(axis=0)
        key = tuple(np.round(w, 14).tolist())
        if key not in cache:
            den = float(w @ c)
            load = float(w @ lm) / den if den > 0 else 0.0
            if load == 0.0:
                cache[key] = (0.0, SeriesValue(0.0, 0.0))
            elif load >= 1.0:
                cache[key] = (load, SeriesValue(1.0, 0.0))
            else:
                tail = integrated_tail_from_weights(w, objects)
                cache[key] = (
                    load,
                    compound_geometric_tail(
                        load, tail, total_u, query.tol, force_lattice=force_lattice
                    ),
                )
        load, sv = cache[key]
        if load >= 1.0:
            certain += prob
        value += prob * sv.value
        error += prob * sv.error_bound
        if parts is not None:
            parts.append((real.indicator.copy(), prob, load, sv.value))
    return HittingResult(
        min(value, 1.0),
        error,
        certain,
        method="exact",
        decomposition=tuple(parts) if parts is not None else None,
    )


def _hitting_sum_mc(query) -> HittingResult:
    from .montecarlo import SimPlan, estimate_hitting

    n = int(min(4_000_000, max(10_000, math.ceil(2.25 / query.tol**2))))
    plan = SimPlan(n_paths=n, seed=0, target="sum")
    est = estimate_hitting(query, plan)
    return HittingResult(
        est.mean,
        3.0 * est.std_error + est.truncation_bound,
        0.0,
        method="mc",
    )


def hitting_single(
    spec: NetworkSpec,
    objects: Sequence[ObjectParams],
    agent: int,
    barrier: float,
    tol: float = 1e-6,
) -> HittingResult:
    """Hitting probability of one agent's own barrier."""
    barriers = [0.0] * spec.q
    barriers[agent] = barrier
    return hitting_sum(HittingQuery(spec, objects, (agent,), barriers, tol))


def hitting_sum_exponential_system(query: HittingQuery) -> HittingResult:
    """Closed-form group hitting probability in the exponential system.

    Requires exponential jumps with a common arrival rate and the
    exponential weight scheme; the load takes one value per set of
    connected objects and the expectation is exact, with no lattice work.
    """
    spec, objects, group = query.spec, query.objects, query.group
    if not isinstance(spec.scheme, ExponentialSystem):
        raise ModelMismatch("exponential-system closed form needs the exponential scheme")
    if not all(isinstance(o.jump, Exponential) for o in objects):
        raise ModelMismatch("exponential-system closed form needs exponential jumps")
    lams = [o.lam for o in objects]
    if max(lams) - min(lams) > 1e-12 * max(lams):
        raise ModelMismatch("exponential-system closed form needs a common arrival rate")
    lam = lams[0]
    scheme = resolve_scheme(spec.scheme, objects, spec.q, len(group))
    rate = scheme.rate
    _check_exponential_rate(spec, objects, group, rate)
    total_u = query.total_barrier

    pi = connect_probabilities(spec, group)
    inv = np.array([o.drift / o.jump.mean for o in objects])  # c_j / mu_j
    free = np.flatnonzero((pi > 0.0) & (pi < 1.0))
    forced = np.flatnonzero(pi == 1.0)
    if len(free) > 22:
        raise EnumerationTooLarge("too many objects for subset enumeration")
    value = 0.0
    certain = 0.0
    for code in range(1 << len(free)):
        members = list(forced) + [free[k] for k in range(len(free)) if (code >> k) & 1]
        prob = 1.0
        for k in range(len(free)):
            prob *= pi[free[k]] if (code >> k) & 1 else 1.0 - pi[free[k]]
        if not members:
            continue  # load 0 contributes nothing
        load = lam * len(members) / float(inv[members].sum())
        if load >= 1.0:
            value += prob
            certain += prob
        else:
            value += prob * load * math.exp(-total_u * (1.0 - load) / rate)
    return HittingResult(min(value, 1.0), 1e-14, certain, method="exact")


def _check_exponential_rate(spec, objects, group, rate):
    """Worst-case column-sum check for the group rate over possible realizations."""
    p = spec.prob_matrix
    rows = list(normalize_group(group, spec.q))
    others = [i for i in range(spec.q) if i not in rows]
    for j, o in enumerate(objects):
        if not np.any(p[rows, j] > 0):
            continue
        extra = int(sum(p[i, j] > 0 for i in others))
        forced_group = int(sum(p[i, j] == 1.0 for i in rows))
        min_group_deg = max(forced_group, 1)
        worst = rate * (min_group_deg + extra) / (min_group_deg * o.jump.mean)
        if worst > 1.0 + 1e-12:
            from .errors import WeightConstraintViolated

            raise WeightConstraintViolated(
                f"rate {rate:.6g} can push object {j} column sum to {worst:.6g} > 1"
            )


def hitting_equal_rho(spec: NetworkSpec, group, rho_value: float, f) -> float:
    """E f(load) when every object has the same load rho.

    The load is then ``rho`` exactly on the event that the group is
    connected and 0 otherwise, so only the connection probability enters.
    """
    p0 = degzero_probability(spec, group)
    return f(rho_value) * (1.0 - p0) + f(0.0) * p0
