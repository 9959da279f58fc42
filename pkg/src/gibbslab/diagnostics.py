"""Finite-volume uniqueness diagnostics.

Two complementary views:

* boundary influence: how much the worst pair of boundary conditions can
  move the law of a fixed window, as the volume around the window grows;
* one-step contraction: the worst expected disagreement after a coupled
  heat-bath step started from configurations that differ at a single site.

Neither is a proof of uniqueness for an infinite system; both are exact
finite computations.
"""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .couplings import SiteMetric, rho_volume
from .dynamics import BlockSystem, CoupledDynamics
from .errors import ModelError, PartitionFunctionError
from .measures import project
from .model import PairPotentialModel, energy_vector, specification
from .spaces import PROB_TOL, Site


@dataclass(frozen=True)
class InfluenceDetail:
    value: float
    boundary_sites: tuple
    n_boundaries: int
    n_infeasible: int
    maximizer: tuple | None


def boundary_influence_detail(model: PairPotentialModel, volume: Iterable[Site], window: Iterable[Site]) -> InfluenceDetail:
    """Exact sup over boundary pairs of the window TV between specifications.

    Only exterior sites adjacent to ``volume`` are enumerated; farther sites
    cannot change the specification.  Boundaries with zero partition function
    are skipped and counted.
    """
    vol = model.volume(volume)
    win = model.volume(window)
    if not set(win) <= set(vol):
        raise ModelError(f"window {win!r} is not contained in volume {vol!r}")
    ring = model.graph.boundary(vol)
    ring_space = model.space(ring)
    laws, labels, skipped = [], [], 0
    for k in range(ring_space.size):
        bdry = ring_space[k]
        try:
            laws.append(project(specification(model, vol, bdry), win).probs)
        except PartitionFunctionError:
            skipped += 1
            continue
        labels.append(bdry)
    if not laws:
        raise PartitionFunctionError(f"every boundary condition of {vol!r} is infeasible")
    P = np.vstack(laws)
    best, arg = 0.0, None
    for k in range(len(P) - 1):
        d = 0.5 * np.abs(P[k + 1:] - P[k]).sum(axis=1)
        j = int(np.argmax(d))
        if d[j] > best:
            best, arg = float(d[j]), (labels[k], labels[k + 1 + j])
    return InfluenceDetail(best, ring, ring_space.size, skipped, arg)


def boundary_influence(model: PairPotentialModel, volume: Iterable[Site], window: Iterable[Site]) -> float:
    return boundary_influence_detail(model, volume, window).value


def growing_volumes(model: PairPotentialModel, window: Iterable[Site], sizes: Iterable[int]) -> list[tuple]:
    """Balls around ``window``: the ``m`` sites nearest to it by graph distance.

    Ties are broken by site order, so the volumes are nested.
    """
    win = model.volume(window)
    order = list(win)
    seen = set(win)
    frontier = list(win)
    while frontier:
        nxt = model.volume({y for x in frontier for y in model.graph.neighbors(x) if y not in seen})
        seen.update(nxt)
        order.extend(nxt)
        frontier = list(nxt)
    out = []
    for m in sizes:
        if not len(win) <= m <= len(order):
            raise ModelError(f"volume size {m} outside {len(win)}..{len(order)} for window {win!r}")
        out.append(model.volume(order[:m]))
    return out


@dataclass(frozen=True)
class InfluenceCurve:
    """Boundary influence on a fixed window over nested volumes.

    ``log_slopes[k]`` is the slope of ``log(value)`` between rows ``k-1``
    and ``k`` (NaN for the first row or when a value is zero).  ``rate`` is
    ``exp`` of the least-squares slope over the last ``max(2, M // 2)``
    positive values.
    """

    window: tuple
    labels: tuple
    values: tuple
    log_slopes: tuple
    rate: float
    rate_residual: float
    volumes: tuple = field(repr=False, default=())


def influence_decay_curve(
    model: PairPotentialModel,
    window: Iterable[Site],
    volumes: Sequence[Iterable[Site]],
    labels: Sequence[int] | None = None,
) -> InfluenceCurve:
    win = model.volume(window)
    vols = [model.volume(v) for v in volumes]
    if not vols:
        raise ModelError("need at least one volume")
    for k, v in enumerate(vols):
        if not set(win) <= set(v):
            raise ModelError(f"volume {k + 1} does not contain the window")
        if k and not (set(vols[k - 1]) < set(v)):
            raise ModelError(f"volume {k + 1} does not strictly contain volume {k}")
    labels = tuple(range(1, len(vols) + 1)) if labels is None else tuple(labels)
    values = tuple(boundary_influence(model, v, win) for v in vols)
    slopes = [math.nan]
    for k in range(1, len(values)):
        a, b = values[k - 1], values[k]
        if a > 0 and b > 0:
            slopes.append((math.log(b) - math.log(a)) / (labels[k] - labels[k - 1]))
        else:
            slopes.append(math.nan)
    rate, resid = _decay_rate(labels, values)
    return InfluenceCurve(win, labels, values, tuple(slopes), rate, resid, tuple(vols))


def _decay_rate(labels, values) -> tuple[float, float]:
    tail = max(2, len(values) // 2)
    xs = np.array(labels[-tail:], dtype=float)
    ys = np.array(values[-tail:], dtype=float)
    keep = ys > 0
    if keep.sum() < 2:
        return math.nan, math.nan
    xs, ys = xs[keep], np.log(ys[keep])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
    return float(math.exp(slope)), resid


# ---------------------------------------------------------------------------
# Single-step decomposition and contraction


@dataclass(frozen=True)
class BlockTerm:
    block: int
    weight: float
    contains_z: bool
    lhs: float
    off_block: float
    in_block: float
    holds: bool

    @property
    def rhs(self) -> float:
        return self.off_block + self.in_block


@dataclass(frozen=True)
class StepDecomposition:
    terms: tuple
    mixed: float
    split: float
    split_holds: bool

    @property
    def holds(self) -> bool:
        return self.split_holds and all(t.holds for t in self.terms)


def _single_discrepancy(space, eta, xi, z, extra_sites) -> None:
    diff = [s for s in (*space.sites, *extra_sites) if eta[s] != xi[s]]
    if diff and diff != [z]:
        raise ModelError(f"sources must agree off {z!r}; they differ at {diff!r}")


def step_decomposition_check(
    model: PairPotentialModel,
    blocks: BlockSystem,
    subset: Iterable[int] | None,
    z: Site,
    eta: Mapping[Site, int],
    xi: Mapping[Site, int],
    window: Iterable[Site],
    rho: SiteMetric,
    strategy: str = "optimal",
) -> StepDecomposition:
    """Split the expected window distance after one coupled step, block by block.

    For each block ``i`` the expected ``window`` distance under ``K_i`` is
    compared with the frozen off-block part (nonzero only when ``z`` is in the
    window but not in the block) plus the in-block expectation.  The
    ``B(z)`` / complement weighted sum is then compared with ``K_S`` built
    directly.
    """
    dyn = CoupledDynamics(model, blocks, eta, xi, strategy)
    space = dyn.space
    if z not in set(space.sites):
        raise ModelError(f"site {z!r} is not in the volume")
    win = tuple(s for s in space.sites if s in set(window))
    if len(win) != len(set(window)):
        raise ModelError("window must lie inside the volume")
    _single_discrepancy(space, eta, xi, z, model.graph.boundary(space.sites))
    a, b = space.index(eta), space.index(xi)
    s = blocks.resolve(subset)
    w_s = blocks.weight(s)
    gap = float(rho[z][eta[z], xi[z]])
    members_z = set(blocks.membership(z))
    terms = []
    for i in s:
        K = dyn.block_coupling(i, a, b)
        theta = set(blocks.blocks[i])
        lhs = rho_volume(K, rho, win)
        off = gap if (z in win and z not in theta) else 0.0
        inner = rho_volume(K, rho, [x for x in win if x in theta])
        terms.append(BlockTerm(i, blocks.weights[i], i in members_z, lhs, off, inner, lhs <= off + inner + PROB_TOL))
    inside = sum(t.weight * t.lhs for t in terms if t.contains_z)
    outside = sum(t.weight * t.lhs for t in terms if not t.contains_z)
    split = (inside + outside) / w_s
    mixed = rho_volume(dyn.mixed_coupling(a, b, s), rho, win)
    return StepDecomposition(tuple(terms), mixed, split, abs(mixed - split) <= PROB_TOL)


@dataclass(frozen=True)
class ContractionReport:
    """Worst one-step expected-distance ratio per site and overall."""

    strategy: str
    per_site: dict
    constant: float
    site: Site | None
    pair: tuple | None

    @property
    def contracting(self) -> bool:
        return self.constant < 1.0


def contraction_constant(
    model: PairPotentialModel,
    blocks: BlockSystem,
    exterior: Mapping[Site, int],
    subset: Iterable[int] | None = None,
    rho: SiteMetric | None = None,
    strategy: str = "optimal",
) -> ContractionReport:
    """Max over sites ``z``, admissible ``eta`` and values ``v != eta_z`` of
    ``E_{K_S(eta, eta^{z->v})}[rho_Psi] / rho_z(eta_z, v)``.

    Both sources share the exterior; only admissible (finite-energy) pairs
    are considered.
    """
    dyn = CoupledDynamics(model, blocks, exterior, exterior, strategy)
    space = dyn.space
    if rho is None:
        rho = SiteMetric.discrete(space.sites, model.q)
    s = blocks.resolve(subset)
    w_s = blocks.weight(s)
    coeff = [(i, blocks.weights[i] / w_s) for i in s]
    ok = np.isfinite(energy_vector(model, space.sites, space, exterior))
    digits = space.digits
    per_site = {}
    best, best_site, best_pair = -math.inf, None, None
    for k, z in enumerate(space.sites):
        site_best, site_pair = -math.inf, None
        step = int(space.radix[k])
        for a in np.flatnonzero(ok):
            a = int(a)
            va = int(digits[a, k])
            for v in range(model.q):
                if v == va:
                    continue
                b = a + (v - va) * step
                if not ok[b]:
                    continue
                num = sum(c * dyn.expected_distance(i, a, b, rho, space.sites) for i, c in coeff)
                ratio = num / rho[z][va, v]
                if ratio > site_best:
                    site_best, site_pair = ratio, (a, b)
        per_site[z] = (site_best if site_pair else math.nan, site_pair)
        if site_pair and site_best > best:
            best, best_site, best_pair = site_best, z, site_pair
    return ContractionReport(strategy, per_site, best if best_pair else math.nan, best_site, best_pair)


# ---------------------------------------------------------------------------


def block_recipe(recipe: str, model: PairPotentialModel, volume: Sequence[Site]) -> BlockSystem:
    """``single-site``: one block per site; ``edges``: one block per edge inside the volume
    (plus singletons for isolated sites); ``whole``: one block equal to the volume."""
    vol = model.volume(volume)
    if recipe == "single-site":
        return BlockSystem.single_sites(vol)
    if recipe == "whole":
        return BlockSystem(vol, (vol,))
    if recipe == "edges":
        inside = set(vol)
        blocks = [e for e in model.graph.edges if e[0] in inside and e[1] in inside]
        covered = {x for e in blocks for x in e}
        blocks += [(x,) for x in vol if x not in covered]
        return BlockSystem(vol, tuple(blocks))
    raise ValueError(f"unknown block recipe {recipe!r}")


@dataclass(frozen=True)
class UniquenessReport:
    curve: InfluenceCurve
    contraction: ContractionReport
    decay_observed: bool
    verdict: str

    def summary(self) -> str:
        c = self.curve
        lines = [
            f"window: {','.join(map(str, c.window))}",
            f"volumes: {len(c.values)} (sizes {', '.join(str(len(v)) for v in c.volumes)})",
            f"boundary influence: {', '.join(f'{v:.6g}' for v in c.values)}",
            f"empirical decay rate: {c.rate:.6g} (log-fit residual {c.rate_residual:.3g})",
            f"contraction constant ({self.contraction.strategy}): {self.contraction.constant:.6g}"
            f" at site {self.contraction.site}",
            f"verdict: {self.verdict}",
            "note: finite-volume computations only; no claim about infinite-volume uniqueness",
        ]
        return "\n".join(lines)


def uniqueness_report(
    model: PairPotentialModel,
    window: Iterable[Site],
    volumes: Sequence[Iterable[Site]],
    recipe: str = "single-site",
    strategy: str = "optimal",
    rho: SiteMetric | None = None,
) -> UniquenessReport:
    """Influence curve on ``volumes`` plus the worst-boundary contraction constant on the largest one."""
    curve = influence_decay_curve(model, window, volumes)
    big = curve.volumes[-1]
    blocks = block_recipe(recipe, model, big)
    ring_space = model.space(model.graph.boundary(big))
    worst = None
    for k in range(ring_space.size):
        bdry = ring_space[k]
        if not np.isfinite(energy_vector(model, big, model.space(big), bdry)).any():
            continue
        rep = contraction_constant(model, blocks, bdry, None, rho, strategy)
        if worst is None or rep.constant > worst.constant:
            worst = rep
    if worst is None:
        raise PartitionFunctionError(f"every boundary condition of {big!r} is infeasible")
    v = np.array(curve.values)
    decay = bool(np.all(np.diff(v) <= PROB_TOL) and (v[-1] < v[0] or v[-1] <= PROB_TOL))
    parts = []
    if decay:
        parts.append("decay observed")
    if worst.contracting:
        parts.append("contraction certified")
    verdict = "; ".join(parts) if parts else "neither"
    return UniquenessReport(curve, worst, decay, verdict)
