"""Total variation, marginals and convex mixtures of exact distributions."""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .model import PairPotentialModel, specification
from .spaces import PROB_TOL, ConfigSpace, FiniteDistribution, Site

__all__ = [
    "FiniteDistribution",
    "TV_METHODS",
    "tv_distance",
    "tv_distance_exhaustive",
    "project",
    "projected_tv",
    "mix",
    "BoundaryDecomposition",
    "decompose_over_boundary",
    "mixture_bound_check",
]

TV_METHODS = ("half_sum", "best_event", "one_minus_min")


def tv_distance(mu: FiniteDistribution, nu: FiniteDistribution, method: str = "half_sum") -> float:
    """Total variation distance, by any of three equivalent formulas.

    ``half_sum``: ``0.5 * sum |mu - nu|``.
    ``best_event``: ``mu(B) - nu(B)`` for ``B = {i : mu(i) >= nu(i)}``.
    ``one_minus_min``: ``1 - sum min(mu, nu)``.
    """
    mu.space.require_same(nu.space, "distribution spaces")
    p, r = mu.probs, nu.probs
    if method == "half_sum":
        return float(0.5 * np.abs(p - r).sum())
    if method == "best_event":
        best = p >= r
        return float(p[best].sum() - r[best].sum())
    if method == "one_minus_min":
        return float(1.0 - np.minimum(p, r).sum())
    raise ValueError(f"unknown TV method {method!r}; expected one of {TV_METHODS}")


def tv_distance_exhaustive(mu: FiniteDistribution, nu: FiniteDistribution) -> float:
    """``max_A |mu(A) - nu(A)|`` over all ``2**n`` events; spaces of at most 16 states."""
    mu.space.require_same(nu.space, "distribution spaces")
    n = mu.space.size
    if n > 16:
        raise ValueError(f"exhaustive event search limited to 16 states, got {n}")
    masks = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    return float(np.abs(masks @ (mu.probs - nu.probs)).max())


def project(mu: FiniteDistribution, sites: Iterable[Site]) -> FiniteDistribution:
    """Marginal of ``mu`` on ``sites`` (kept in the order of ``mu``'s space)."""
    wanted = set(sites)
    missing = wanted - set(mu.space.sites)
    if missing:
        raise ModelError(f"cannot project onto {sorted(map(str, missing))}: not in {mu.space.sites!r}")
    target = tuple(s for s in mu.space.sites if s in wanted)
    if target == mu.space.sites:
        return mu
    sub = ConfigSpace(target, mu.space.q)
    if not target:
        # the empty marginal is the unit mass, exactly
        return FiniteDistribution(sub, np.ones(1))
    idx = mu.space.sub_index(target)
    return FiniteDistribution(sub, np.bincount(idx, weights=mu.probs, minlength=sub.size))


def projected_tv(mu: FiniteDistribution, nu: FiniteDistribution, sites: Iterable[Site]) -> float:
    sites = list(sites)
    return tv_distance(project(mu, sites), project(nu, sites))


def mix(weights: Sequence[float], components: Sequence[FiniteDistribution]) -> FiniteDistribution:
    """Convex combination ``sum_k weights[k] * components[k]``."""
    w = np.asarray(weights, dtype=float)
    if len(components) == 0 or w.shape != (len(components),):
        raise ValueError(f"need one weight per component, got {w.shape} for {len(components)}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"weights must be non-negative and sum to 1, got sum {w.sum()!r}")
    space = components[0].space
    acc = np.zeros(space.size)
    for wk, c in zip(w, components):
        space.require_same(c.space, "mixture components")
        acc += wk * c.probs
    return FiniteDistribution(space, acc / acc.sum())


@dataclass(frozen=True)
class BoundaryDecomposition:
    """``project(gamma_W, Lambda)`` written as a mixture over boundaries of ``Psi``.

    ``boundary_sites`` are the sites of ``W \\ Psi`` adjacent to ``Psi``;
    patterns of zero probability are dropped.
    """

    boundary_sites: tuple
    weights: np.ndarray
    boundaries: list
    components: list

    def mixture(self) -> FiniteDistribution:
        return mix(self.weights, self.components)


def decompose_over_boundary(
    model: PairPotentialModel,
    outer: Iterable[Site],
    sigma: Mapping[Site, int],
    middle: Iterable[Site],
    window: Iterable[Site],
) -> BoundaryDecomposition:
    """Decompose the window marginal of ``gamma_outer^sigma`` over boundaries of ``middle``.

    Requires ``window <= middle <= outer``.  By locality only the sites of
    ``outer \\ middle`` adjacent to ``middle`` are enumerated; sites outside
    ``outer`` keep their ``sigma`` values.
    """
    outer, middle, window = model.volume(outer), model.volume(middle), model.volume(window)
    if not set(middle) <= set(outer):
        raise ModelError(f"middle volume {middle!r} is not contained in {outer!r}")
    if not set(window) <= set(middle):
        raise ModelError(f"window {window!r} is not contained in {middle!r}")
    full = specification(model, outer, sigma)
    ring = tuple(s for s in model.graph.boundary(middle) if s in set(outer))
    pattern_law = project(full, ring)
    weights, boundaries, components = [], [], []
    for idx in np.flatnonzero(pattern_law.probs > 0):
        pattern = pattern_law.space[int(idx)]
        bdry = dict(sigma)
        bdry.update(pattern)
        weights.append(pattern_law.probs[idx])
        boundaries.append(pattern)
        components.append(project(specification(model, middle, bdry), window))
    w = np.array(weights)
    return BoundaryDecomposition(ring, w / w.sum(), boundaries, components)


@dataclass(frozen=True)
class MixtureBound:
    lhs: float
    rhs: float
    holds: bool


def mixture_bound_check(
    model: PairPotentialModel,
    outer: Iterable[Site],
    sigma: Mapping[Site, int],
    tau: Mapping[Site, int],
    middle: Iterable[Site],
    window: Iterable[Site],
) -> MixtureBound:
    """Window TV of two outer measures against the worst pair of mixture components.

    Both measures are mixtures of middle-volume specifications, so their
    window distance is at most the largest window distance between components.
    """
    a = decompose_over_boundary(model, outer, sigma, middle, window)
    b = decompose_over_boundary(model, outer, tau, middle, window)
    lhs = tv_distance(a.mixture(), b.mixture())
    rhs = max(tv_distance(x, y) for x, y in itertools.product(a.components, b.components))
    return MixtureBound(lhs, rhs, lhs <= rhs + PROB_TOL)
