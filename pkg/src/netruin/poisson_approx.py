"""Poisson surrogates of the network load and Delta-method moment formulas.

Replacing the independent edge indicators by Poisson variables with the
same means changes the expectation of any [0,1]-valued functional of the
slots by at most the sum of squared edge probabilities.  This module
draws the corresponding surrogates of the group load for the homogeneous
and exponential schemes and evaluates the closed-form mean approximation
for a single agent's load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateColumn, ModelMismatch
from .model import Exponential, ObjectParams, rho
from .network import ExponentialSystem, Homogeneous, NetworkSpec, normalize_group

__all__ = [
    "PoissonSurrogate",
    "tv_bound",
    "poisson_surrogate",
    "sample_poissonized_pk",
    "delta_method_mean_pk",
    "exp_growth_series",
]


@dataclass(frozen=True)
class PoissonSurrogate:
    """Slot intensities of a Poissonized network plus its total-variation budget."""

    means: np.ndarray
    tv_budget: float

    def __post_init__(self):
        if np.any(np.asarray(self.means) < 0) or self.tv_budget < 0:
            raise DegenerateColumn("surrogate intensities must be nonnegative")


def tv_bound(spec: NetworkSpec, group=None) -> float:
    """Total-variation budget of full Poissonization: sum of squared edge probabilities."""
    p = spec.prob_matrix
    return float((p**2).sum())


def poisson_surrogate(spec: NetworkSpec, group, variant: str) -> PoissonSurrogate:
    """Slot intensities used by the given surrogate variant."""
    rows = normalize_group(group, spec.q)
    p = spec.prob_matrix
    if variant in ("homogeneous_group", "homogeneous_single_agent"):
        means = p[list(rows)].ravel()
    elif variant == "exponential_system":
        means = 1.0 - np.prod(1.0 - p[list(rows)], axis=0)
    else:
        raise ModelMismatch(f"unknown surrogate variant {variant!r}")
    return PoissonSurrogate(np.asarray(means, dtype=float), tv_bound(spec))


def sample_poissonized_pk(
    spec: NetworkSpec,
    objects: Sequence[ObjectParams],
    group,
    variant: str,
    rng: Union[int, np.random.Generator],
    size: int | None = None,
):
    """Draw the Poissonized surrogate of the group load.

    ``variant`` selects the approximation: ``"homogeneous_group"``
    replaces every group edge indicator and every leave-one-out degree by
    independent Poisson variables; ``"homogeneous_single_agent"`` keeps
    the agent's own edges Bernoulli and Poissonizes only the other agents'
    degree contributions; ``"exponential_system"`` Poissonizes the
    per-object group-connection flags.  Returns a scalar for
    ``size=None``, else an array of ``size`` independent draws.
    """
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    rows = list(normalize_group(group, spec.q))
    p = spec.prob_matrix
    n = 1 if size is None else int(size)
    if variant == "homogeneous_group":
        _require_scheme(spec, Homogeneous)
        out = _draw_group_surrogate(gen, p, rows, objects, n)
    elif variant == "homogeneous_single_agent":
        _require_scheme(spec, Homogeneous)
        if len(rows) != 1:
            raise ModelMismatch("single-agent surrogate needs a one-agent group")
        out = _draw_single_agent_surrogate(gen, p, rows[0], objects, n)
    elif variant == "exponential_system":
        _require_scheme(spec, ExponentialSystem)
        if not all(isinstance(o.jump, Exponential) for o in objects):
            raise ModelMismatch("exponential-system surrogate needs exponential jumps")
        lams = [o.lam for o in objects]
        if max(lams) - min(lams) > 1e-12 * max(lams):
            raise ModelMismatch("exponential-system surrogate needs a common arrival rate")
        out = _draw_exponential_surrogate(gen, p, rows, objects, n)
    else:
        raise ModelMismatch(f"unknown surrogate variant {variant!r}")
    return float(out[0]) if size is None else out


def _require_scheme(spec, scheme_type):
    if not isinstance(spec.scheme, scheme_type):
        raise ModelMismatch(
            f"variant requires the {scheme_type.__name__} scheme, "
            f"spec has {type(spec.scheme).__name__}"
        )


def _draw_group_surrogate(gen, p, rows, objects, n):
    d = p.shape[1]
    lm = np.array([o.lam * o.jump.mean for o in objects])
    c = np.array([o.drift for o in objects])
    z = gen.poisson(p[rows][None, :, :], size=(n, len(rows), d)).astype(float)
    loo_means = p[rows].sum(axis=0)[None, :] - p[rows]  # leave-one-out within the group
    zloo = gen.poisson(loo_means[None, :, :], size=(n, len(rows), d)).astype(float)
    contrib = z * c[None, None, :] / (1.0 + zloo)
    total = contrib.sum(axis=(1, 2))
    col = contrib.sum(axis=1)  # per object ell: sum over s of Z c /(1+Zloo)
    denom = c[None, None, :] + (1.0 + zloo) * (total[:, None, None] - col[:, None, :])
    return (z * lm[None, None, :] / denom).sum(axis=(1, 2))


def _draw_single_agent_surrogate(gen, p, agent, objects, n):
    d = p.shape[1]
    rhos = np.array([rho(o) for o in objects])
    c = np.array([o.drift for o in objects])
    ind = (gen.random((n, d)) < p[agent][None, :]).astype(float)
    pi = p.sum(axis=0) - p[agent]  # other agents' expected connections per object
    zloo = gen.poisson(pi[None, :], size=(n, d)).astype(float)
    g = ind * c[None, :] / (1.0 + zloo)
    gsum = g.sum(axis=1)
    s = 1.0 + (1.0 + zloo) / c[None, :] * (gsum[:, None] - g)
    return (ind * rhos[None, :] / s).sum(axis=1)


def _draw_exponential_surrogate(gen, p, rows, objects, n):
    pi = 1.0 - np.prod(1.0 - p[rows], axis=0)
    inv_rho = np.array([1.0 / rho(o) for o in objects])
    z = gen.poisson(pi[None, :], size=(n, len(pi))).astype(float)
    h = z * inv_rho[None, :]
    hsum = h.sum(axis=1)
    denom = inv_rho[None, :] + hsum[:, None] - h
    return (z / denom).sum(axis=1)


def exp_growth_series(x: float) -> float:
    """``sum_{k>=1} x^k / (k * k!)``, the entire part of the cosh/sinh integrals.

    Computed termwise to 1e-16 relative accuracy; this combination avoids
    the cancellation between the integrals, the logarithm and the
    Euler-Mascheroni constant.
    """
    if x < 0:
        raise DegenerateColumn("series argument must be nonnegative")
    if x == 0.0:
        return 0.0
    term = x
    total = x
    k = 1
    while True:
        k += 1
        term *= x * (k - 1) / (k * k)
        total += term
        if term < 1e-16 * total or k > 10_000:
            return total


def delta_method_mean_pk(spec: NetworkSpec, objects: Sequence[ObjectParams], agent: int):
    """Closed-form approximation of one agent's expected load, with diagnostics.

    Requires the homogeneous scheme.  Returns ``(approximation,
    per-object variance diagnostics)``; the diagnostics expose the
    variance of each denominator statistic so callers can judge whether
    the first-order expansion is trustworthy.
    """
    _require_scheme(spec, Homogeneous)
    p = spec.prob_matrix
    if agent < 0 or agent >= spec.q:
        raise ModelMismatch(f"agent {agent} outside range 0..{spec.q - 1}")
    if np.any(p < 0):
        raise DegenerateColumn("edge probabilities must be nonnegative")
    d = spec.d
    rhos = np.array([rho(o) for o in objects])
    c = np.array([o.drift for o in objects])
    pi = p.sum(axis=0) - p[agent]

    def phi(x: float) -> float:
        return 1.0 if x == 0.0 else -math.expm1(-x) / x

    approx = 0.0
    var_s = np.zeros(d)
    for j in range(d):
        beta = 1.0
        var = 0.0
        for k in range(d):
            if k == j:
                continue
            beta += p[agent, k] * (1.0 + pi[k]) * (c[k] / c[j]) * phi(pi[k])
            var += (
                (c[k] / c[j]) ** 2
                * p[agent, k]
                * (exp_growth_series(pi[k]) - phi(pi[k]) ** 2)
            )
        var_s[j] = pi[j] ** 2 * var
        approx += p[agent, j] * rhos[j] / beta
    return float(approx), var_s
