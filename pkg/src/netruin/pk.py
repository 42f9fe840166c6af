"""The network load parameter P: pointwise values, exact law, moments, limits.

For an agent group the aggregated process has random load

    ``P = sum_j w_j lam_j mu_j / sum_j w_j c_j``,   ``w_j = sum_{i in group} A[i, j]``,

with ``P = 0`` when the group is isolated.  Its exact law is computed
either by enumerating all network realizations or, for schemes whose
weight-column sums depend on each object column only through the pair
(group edge count, total edge count), by a product over independent
object columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateConditioning,
    EnumerationTooLarge,
    SchemeNotFactorizable,
)
from .model import ObjectParams, rho
from .network import (
    AdjacencyRealization,
    CustomDeterministic,
    ExponentialSystem,
    Homogeneous,
    InverseDrift,
    InverseExpectedLoss,
    NetworkSpec,
    WeightConstraintViolated,
    connect_probabilities,
    degzero_probability,
    enumerate_realizations,
    normalize_group,
    resolve_scheme,
)

__all__ = [
    "PKDistribution",
    "PKMoments",
    "pk_value",
    "pk_distribution",
    "pk_distribution_factorized",
    "conditional_moments",
    "small_p_limit",
    "envelope_and_markov",
    "pk_moments_auto",
]

ATOM_MERGE_TOL = 1e-12
_ENUM_CHUNK = 1 << 18
_FACTOR_STATE_CAP = 20_000_000


@dataclass(frozen=True)
class PKDistribution:
    """Finite law of the group load: atom values, probabilities, isolated mass."""

    values: np.ndarray
    probs: np.ndarray
    degzero_mass: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1:
            raise ValueError("values and probs must be matching 1-d arrays")
        if np.any(p < -1e-12):
            raise ValueError("atom probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("atom probabilities must sum to 1")
        mass_at_zero = float(p[np.abs(v) <= ATOM_MERGE_TOL].sum())
        if mass_at_zero < self.degzero_mass - 1e-10:
            raise ValueError("value 0 must carry at least the isolated-group mass")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    def expect(self, f) -> float:
        return float(sum(p * f(v) for v, p in zip(self.values, self.probs)))

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def var(self) -> float:
        m = self.mean()
        return float(np.dot((self.values - m) ** 2, self.probs))

    def prob_at_least(self, t: float) -> float:
        return float(self.probs[self.values >= t - 1e-12].sum())


class PKMoments(NamedTuple):
    mean_given_connected: float
    var_given_connected: float
    mean: float
    var: float
    prob_at_least_one: float


def pk_value(realization: AdjacencyRealization, objects: Sequence[ObjectParams], group) -> float:
    """Load of the aggregated group process for one realization (0 if isolated)."""
    rows = normalize_group(group, realization.q)
    w = realization.weights[list(rows)].sum(axis=0)
    den = float(sum(wj * o.drift for wj, o in zip(w, objects)))
    if den <= 0.0:
        return 0.0
    num = float(sum(wj * o.lam * o.jump.mean for wj, o in zip(w, objects)))
    return num / den


def _merge_atoms(values: np.ndarray, probs: np.ndarray, tol: float = ATOM_MERGE_TOL):
    order = np.argsort(values, kind="stable")
    v = values[order]
    p = probs[order]
    if v.size == 0:
        return v, p
    starts = np.concatenate([[0], np.flatnonzero(np.diff(v) > tol) + 1])
    out_p = np.add.reduceat(p, starts)
    weighted = np.add.reduceat(v * p, starts)
    with np.errstate(invalid="ignore", divide="ignore"):
        out_v = np.where(out_p > 0, weighted / np.where(out_p > 0, out_p, 1.0), v[starts])
    keep = out_p > 0
    if not keep.all():
        keep |= np.arange(len(out_p)) == 0  # keep at least one atom
    return out_v[keep], out_p[keep]


def _batch_weights(t, m, scheme, objects, q: int, group_size: int):
    """Weight-column sums w (batch x d) from column counts, with constraint check."""
    t = np.asarray(t, dtype=float)
    m = np.asarray(m, dtype=float)
    mu = np.array([o.jump.mean for o in objects])
    if isinstance(scheme, Homogeneous):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(t > 0, t / np.where(m > 0, m, 1.0), 0.0)
    if isinstance(scheme, ExponentialSystem):
        r = scheme.resolved_rate(objects, q, group_size)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(t > 0, m / np.where(t > 0, t, 1.0), 0.0)
        worst = (ratio / mu[None, :]).max(axis=0) * r
        _check_columns(worst)
        return np.where(t > 0, r / mu[None, :], 0.0)
    if isinstance(scheme, InverseExpectedLoss):
        k = scheme.resolved_k(objects, q)
        lm = np.array([o.lam * o.jump.mean for o in objects])
        _check_columns((m * (k / lm)[None, :]).max(axis=0))
        return t * (k / lm)[None, :]
    if isinstance(scheme, InverseDrift):
        c = np.array([o.drift for o in objects])
        _check_columns((m / c[None, :]).max(axis=0))
        return t / c[None, :]
    raise SchemeNotFactorizable(
        f"scheme {type(scheme).__name__} has no column-count weight form"
    )


def _check_columns(worst_per_column):
    worst = np.asarray(worst_per_column)
    if np.any(worst > 1.0 + 1e-12):
        j = int(np.argmax(worst))
        raise WeightConstraintViolated(
            f"object column {j} can sum to {worst[j]:.6g} > 1 under the scheme"
        )


def _values_from_weights(w, objects):
    lm = np.array([o.lam * o.jump.mean for o in objects])
    c = np.array([o.drift for o in objects])
    num = w @ lm
    den = w @ c
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def pk_distribution(spec: NetworkSpec, objects: Sequence[ObjectParams], group) -> PKDistribution:
    """Exact law of the group load by enumerating network realizations."""
    rows = normalize_group(group, spec.q)
    if isinstance(spec.scheme, CustomDeterministic):
        values, probs = [], []
        for real, prob in enumerate_realizations(spec, objects, group):
            values.append(pk_value(real, objects, group))
            probs.append(prob)
        v, p = _merge_atoms(np.array(values), np.array(probs))
        return PKDistribution(v, p, degzero_probability(spec, group))

    scheme = resolve_scheme(spec.scheme, objects, spec.q, len(rows))
    p_mat = spec.prob_matrix
    free = [(i, j) for i in range(spec.q) for j in range(spec.d) if 0.0 < p_mat[i, j] < 1.0]
    if len(free) > 22:
        raise EnumerationTooLarge(f"{len(free)} free edge slots exceed the cap of 22")
    forced = p_mat == 1.0
    base_t = forced[list(rows)].sum(axis=0).astype(np.int64)
    base_m = forced.sum(axis=0).astype(np.int64)

    slot_p = np.array([p_mat[i, j] for i, j in free])
    slot_col = np.array([j for _, j in free], dtype=np.int64)
    slot_in_group = np.array([i in rows for i, _ in free])

    all_v, all_p = [], []
    n_codes = 1 << len(free)
    for start in range(0, n_codes, _ENUM_CHUNK):
        codes = np.arange(start, min(start + _ENUM_CHUNK, n_codes), dtype=np.uint64)
        if len(free):
            bits = ((codes[:, None] >> np.arange(len(free), dtype=np.uint64)) & 1).astype(
                np.float64
            )
            probs = np.prod(np.where(bits > 0, slot_p, 1.0 - slot_p), axis=1)
            t = np.tile(base_t.astype(float), (len(codes), 1))
            m = np.tile(base_m.astype(float), (len(codes), 1))
            for k in range(len(free)):
                m[:, slot_col[k]] += bits[:, k]
                if slot_in_group[k]:
                    t[:, slot_col[k]] += bits[:, k]
        else:
            probs = np.ones(1)
            t = base_t[None, :].astype(float)
            m = base_m[None, :].astype(float)
        w = _batch_weights(t, m, scheme, objects, spec.q, len(rows))
        all_v.append(_values_from_weights(w, objects))
        all_p.append(probs)
    v, p = _merge_atoms(np.concatenate(all_v), np.concatenate(all_p))
    return PKDistribution(v, p, degzero_probability(spec, group))


def _poisson_binomial(probabilities: np.ndarray) -> np.ndarray:
    pmf = np.array([1.0])
    for prob in probabilities:
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] = pmf * (1.0 - prob)
        nxt[1:] += pmf * prob
        pmf = nxt
    return pmf


def pk_distribution_factorized(
    spec: NetworkSpec, objects: Sequence[ObjectParams], group
) -> PKDistribution:
    """Exact law of the group load as a product over independent object columns.

    Valid for schemes whose weight-column sums depend on a column only
    through the pair (group edge count t, total edge count m); the law of
    (t, m) per column is a product of two independent edge-count laws.
    Agrees with :func:`pk_distribution` wherever both apply.
    """
    rows = normalize_group(group, spec.q)
    if isinstance(spec.scheme, CustomDeterministic):
        raise SchemeNotFactorizable("custom deterministic weights are not factorizable")
    scheme = resolve_scheme(spec.scheme, objects, spec.q, len(rows))
    others = [i for i in range(spec.q) if i not in rows]
    p_mat = spec.prob_matrix

    probs = np.array([1.0])
    num = np.array([0.0])
    den = np.array([0.0])
    degzero = 1.0
    for j in range(spec.d):
        t_pmf = _poisson_binomial(p_mat[list(rows), j])
        s_pmf = _poisson_binomial(p_mat[others, j]) if others else np.array([1.0])
        t_grid, s_grid = np.meshgrid(
            np.arange(len(t_pmf)), np.arange(len(s_pmf)), indexing="ij"
        )
        state_p = np.outer(t_pmf, s_pmf).ravel()
        t_flat = t_grid.ravel().astype(float)
        m_flat = (t_grid + s_grid).ravel().astype(float)
        keep = state_p > 0.0
        w = _batch_weights(
            t_flat[keep, None], m_flat[keep, None], scheme, [objects[j]], spec.q, len(rows)
        )[:, 0]
        o = objects[j]
        col_num = w * o.lam * o.jump.mean
        col_den = w * o.drift
        # merge column states with identical contributions
        key = np.stack([col_num, col_den], axis=1)
        cv, cp = _merge_pairs(key, state_p[keep])
        degzero *= float(state_p[keep][t_flat[keep] == 0].sum())
        if len(probs) * len(cp) > _FACTOR_STATE_CAP:
            raise EnumerationTooLarge(
                f"factorized product would exceed {_FACTOR_STATE_CAP} states"
            )
        probs = (probs[:, None] * cp[None, :]).ravel()
        num = (num[:, None] + cv[None, :, 0]).ravel()
        den = (den[:, None] + cv[None, :, 1]).ravel()
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    v, p = _merge_atoms(values, probs)
    return PKDistribution(v, p, degzero)


def _merge_pairs(pairs: np.ndarray, probs: np.ndarray):
    """Merge rows of (num, den) contributions that agree within 1e-12."""
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    sorted_pairs = pairs[order]
    sorted_probs = probs[order]
    diff = np.abs(np.diff(sorted_pairs, axis=0)).max(axis=1)
    starts = np.concatenate([[0], np.flatnonzero(diff > ATOM_MERGE_TOL) + 1])
    out_p = np.add.reduceat(sorted_probs, starts)
    out_pairs = sorted_pairs[starts]
    return out_pairs, out_p


def conditional_moments(dist: PKDistribution) -> PKMoments:
    """Moments of the load, unconditionally and given the group is connected.

    Conditioning removes the forced atom at 0 whose mass is the
    isolated-group probability, then renormalizes.
    """
    if dist.degzero_mass >= 1.0 - 1e-15:
        raise DegenerateConditioning("group is isolated almost surely")
    connected_mass = 1.0 - dist.degzero_mass
    probs = dist.probs.copy()
    at_zero = np.abs(dist.values) <= ATOM_MERGE_TOL
    if at_zero.any():
        probs[at_zero] = np.maximum(probs[at_zero] - dist.degzero_mass, 0.0)
    cond = probs / connected_mass
    cmean = float(np.dot(dist.values, cond))
    cvar = float(np.dot((dist.values - cmean) ** 2, cond))
    return PKMoments(cmean, cvar, dist.mean(), dist.var(), dist.prob_at_least(1.0))


def small_p_limit(objects: Sequence[ObjectParams]) -> PKDistribution:
    """Connected-group limit law as edge probabilities vanish.

    With at most one surviving edge, the connected object is uniform over
    the ``d`` objects, so the load is uniform over the per-object values.
    """
    rhos = np.array([rho(o) for o in objects])
    v, p = _merge_atoms(rhos, np.full(len(rhos), 1.0 / len(rhos)))
    return PKDistribution(v, p, 0.0)


def envelope_and_markov(
    objects: Sequence[ObjectParams], spec: NetworkSpec, group, t: float
):
    """Envelope [min rho, max rho] of the connected load plus a Markov tail bound.

    The bound ``sum_j P(group ~ j) rho_j / t`` dominates ``P(P >= t)``.
    """
    if t <= 0:
        raise ValueError("threshold t must be positive")
    rhos = np.array([rho(o) for o in objects])
    pq = connect_probabilities(spec, group)
    return float(rhos.min()), float(rhos.max()), float(np.dot(pq, rhos) / t)


def pk_moments_auto(
    spec: NetworkSpec,
    objects: Sequence[ObjectParams],
    group,
    n_mc: int = 200_000,
    seed: int = 0,
):
    """Moments of the load by the cheapest exact route, falling back to MC.

    Returns ``(moments, method, std_errors)`` where ``method`` is one of
    ``"factorized"``, ``"enumerated"``, ``"mc"``; exact routes carry
    ``std_errors=None``.  Estimates are never silently mixed with exact
    results.
    """
    try:
        dist = pk_distribution_factorized(spec, objects, group)
        return conditional_moments(dist), "factorized", None
    except (SchemeNotFactorizable, EnumerationTooLarge):
        pass
    try:
        dist = pk_distribution(spec, objects, group)
        return conditional_moments(dist), "enumerated", None
    except EnumerationTooLarge:
        pass
    from .montecarlo import estimate_pk_moments

    est = estimate_pk_moments(spec, objects, group, n_mc, seed)
    moments = PKMoments(
        est.mean_given_connected, est.var_given_connected, est.mean, est.var,
        est.prob_at_least_one,
    )
    errs = PKMoments(
        est.se_mean_given_connected, est.se_var_given_connected, est.se_mean, est.se_var,
        est.se_prob_at_least_one,
    )
    return moments, "mc", errs
