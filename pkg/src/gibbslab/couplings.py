"""Couplings of finite distributions, site metrics and path composition."""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CouplingError, ModelError, SpaceMismatch
from .spaces import PROB_TOL, ConfigSpace, FiniteDistribution, Site


class Coupling:
    """Joint probability table over ``row_space x col_space``.

    Entries are non-negative with total mass one.  The marginals are whatever
    the row and column sums are; :meth:`marginal_residual` checks them
    against declared distributions.
    """

    __slots__ = ("row_space", "col_space", "joint")

    def __init__(self, row_space: ConfigSpace, col_space: ConfigSpace, joint):
        j = np.array(joint, dtype=float)
        if j.shape != (row_space.size, col_space.size):
            raise CouplingError(f"joint has shape {j.shape}, expected {(row_space.size, col_space.size)}")
        if not np.all(np.isfinite(j)) or np.any(j < 0):
            raise CouplingError("joint entries must be finite and non-negative")
        if abs(j.sum() - 1.0) > PROB_TOL:
            raise CouplingError(f"joint mass is {j.sum()!r}, not 1")
        j.setflags(write=False)
        self.row_space = row_space
        self.col_space = col_space
        self.joint = j

    def __repr__(self):
        return f"Coupling(sites={self.row_space.sites!r}, shape={self.joint.shape})"

    def row_marginal(self) -> FiniteDistribution:
        return FiniteDistribution(self.row_space, self.joint.sum(axis=1))

    def col_marginal(self) -> FiniteDistribution:
        return FiniteDistribution(self.col_space, self.joint.sum(axis=0))

    def marginal_residual(self, mu: FiniteDistribution, nu: FiniteDistribution) -> float:
        """Sup-norm distance of the row/column sums from ``mu`` and ``nu``."""
        self.row_space.require_same(mu.space, "row space and first marginal")
        self.col_space.require_same(nu.space, "column space and second marginal")
        return float(
            max(
                np.abs(self.joint.sum(axis=1) - mu.probs).max(),
                np.abs(self.joint.sum(axis=0) - nu.probs).max(),
            )
        )

    def nonzero(self):
        """``(row, col, mass)`` triples in row-major order."""
        rows, cols = np.nonzero(self.joint)
        return [(int(r), int(c), float(self.joint[r, c])) for r, c in zip(rows, cols)]


def independent_coupling(mu: FiniteDistribution, nu: FiniteDistribution) -> Coupling:
    return Coupling(mu.space, nu.space, np.outer(mu.probs, nu.probs))


def identity_coupling(mu: FiniteDistribution) -> Coupling:
    return Coupling(mu.space, mu.space, np.diag(mu.probs))


def optimal_coupling(mu: FiniteDistribution, nu: FiniteDistribution) -> Coupling:
    """TV-optimal coupling: common mass on the diagonal, excesses matched by product.

    The excess vectors have disjoint supports, so the product term never
    lands on the diagonal and the mismatch equals the TV distance.
    """
    mu.space.require_same(nu.space, "distribution spaces")
    return Coupling(mu.space, nu.space, optimal_joint(mu.probs, nu.probs))


def optimal_joint(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    common = np.minimum(p, r)
    joint = np.diag(common)
    gap = 1.0 - common.sum()
    if gap > 0:
        ex_p = p - common
        ex_r = r - common
        joint += np.outer(ex_p, ex_r) / gap
    return joint


def independent_joint(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    return np.outer(p, r)


def _require_square(Q: Coupling) -> None:
    if Q.row_space != Q.col_space:
        raise SpaceMismatch("mismatch needs identical row and column spaces")


def mismatch(Q: Coupling) -> float:
    """``P(X != Y)`` under the coupling."""
    _require_square(Q)
    return float(1.0 - np.trace(Q.joint))


class SiteMetric:
    """Per-site distance tables ``rho_x``; the volume distance is their sum.

    Each table must be symmetric with zero diagonal and strictly positive
    off-diagonal entries.
    """

    def __init__(self, tables: Mapping[Site, np.ndarray]):
        self.tables = {}
        for s, t in tables.items():
            t = np.array(t, dtype=float)
            if t.ndim != 2 or t.shape[0] != t.shape[1]:
                raise ModelError(f"metric table for site {s!r} must be square, got {t.shape}")
            off = ~np.eye(t.shape[0], dtype=bool)
            if np.any(np.diag(t) != 0) or not np.array_equal(t, t.T) or np.any(t[off] <= 0):
                raise ModelError(f"metric table for site {s!r} is not a metric on single values")
            t.setflags(write=False)
            self.tables[s] = t

    @classmethod
    def discrete(cls, sites: Iterable[Site], q: int) -> SiteMetric:
        t = 1.0 - np.eye(q)
        return cls({s: t for s in sites})

    def scaled(self, c: float) -> SiteMetric:
        return SiteMetric({s: c * t for s, t in self.tables.items()})

    def __getitem__(self, site):
        return self.tables[site]

    @property
    def inf_gap(self) -> float:
        """Smallest distance between two configurations that differ somewhere."""
        gaps = [t[~np.eye(t.shape[0], dtype=bool)].min() for t in self.tables.values() if t.shape[0] > 1]
        return float(min(gaps)) if gaps else np.inf

    def distance(self, a: Mapping[Site, int], b: Mapping[Site, int], sites: Iterable[Site]) -> float:
        return float(sum(self.tables[s][a[s], b[s]] for s in sites))


def _shared_volume(Q: Coupling) -> None:
    if Q.row_space.sites != Q.col_space.sites or Q.row_space.q != Q.col_space.q:
        raise SpaceMismatch("coupling rows and columns must range over the same volume")


def site_expectation(Q: Coupling, rho: SiteMetric, site: Site) -> float:
    """``E_Q[rho_site(eta_site, xi_site)]``."""
    q = Q.row_space.q
    k = Q.row_space.position(site)
    onehot_r = np.eye(q)[Q.row_space.digits[:, k]]
    onehot_c = np.eye(q)[Q.col_space.digits[:, k]]
    pair_mass = onehot_r.T @ Q.joint @ onehot_c
    return float((pair_mass * rho[site]).sum())


def rho_volume(Q: Coupling, rho: SiteMetric, sites: Iterable[Site]) -> float:
    """``sum_{x in sites} E_Q[rho_x]``, summed in the space's site order."""
    _shared_volume(Q)
    wanted = set(sites)
    unknown = wanted - set(Q.row_space.sites)
    if unknown:
        raise ModelError(f"sites {sorted(map(str, unknown))} are not in the coupling's volume")
    total = 0.0
    for s in Q.row_space.sites:
        if s in wanted:
            total += site_expectation(Q, rho, s)
    return total


def expected_metric(Q: Coupling, rho: SiteMetric) -> float:
    """``E_Q[r(X, Y)]`` with ``r = sum_x rho_x`` over the whole shared volume."""
    return rho_volume(Q, rho, Q.row_space.sites)


@dataclass(frozen=True)
class PathChain:
    """Couplings ``L_1..L_n`` where the column marginal of ``L_j`` is the row marginal of ``L_{j+1}``."""

    links: tuple

    def __post_init__(self):
        links = tuple(self.links)
        object.__setattr__(self, "links", links)
        if not links:
            raise CouplingError("a path chain needs at least one link")
        for j, (a, b) in enumerate(zip(links, links[1:]), start=1):
            if a.col_space != b.row_space:
                raise SpaceMismatch(f"link {j} column space differs from link {j + 1} row space")
            gap = np.abs(a.joint.sum(axis=0) - b.joint.sum(axis=1)).max()
            if gap > PROB_TOL:
                raise CouplingError(f"link {j} and link {j + 1} disagree on their shared marginal by {gap:.3g}")

    def __len__(self):
        return len(self.links)


def conditional_rows(joint: np.ndarray, fallback: str = "lowest") -> np.ndarray:
    """Row-normalise a joint table; empty rows get a fallback law.

    ``fallback="lowest"`` puts the whole row on column 0, ``"uniform"``
    spreads it evenly.  Rows of zero mass never influence a composition.
    """
    mass = joint.sum(axis=1)
    out = np.zeros_like(joint)
    live = mass > 0
    out[live] = joint[live] / mass[live, None]
    if fallback == "lowest":
        out[~live, 0] = 1.0
    elif fallback == "uniform":
        out[~live] = 1.0 / joint.shape[1]
    else:
        raise ValueError(f"unknown fallback {fallback!r}")
    return out


def compose_path(chain: PathChain | Sequence[Coupling], fallback: str = "lowest") -> Coupling:
    """Couple the two ends of a chain by drawing each state from the next link's conditional."""
    if not isinstance(chain, PathChain):
        chain = PathChain(tuple(chain))
    first = chain.links[0]
    if len(chain) == 1:
        return first
    joint = first.joint
    for link in chain.links[1:]:
        joint = joint @ conditional_rows(link.joint, fallback)
    return Coupling(first.row_space, chain.links[-1].col_space, joint)


class BoundCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def telescope_bound_check(chain: PathChain | Sequence[Coupling], rho: SiteMetric, sites: Iterable[Site]) -> BoundCheck:
    """Expected end-to-end distance against the sum of per-link distances."""
    if not isinstance(chain, PathChain):
        chain = PathChain(tuple(chain))
    sites = list(sites)
    lhs = rho_volume(compose_path(chain), rho, sites)
    rhs = 0.0
    for link in chain.links:
        rhs += rho_volume(link, rho, sites)
    return BoundCheck(lhs, rhs, lhs <= rhs + PROB_TOL)


def monotone_correlation_check(grid: Sequence[float], p: Sequence[float], f: Sequence[float], g: Sequence[float]) -> BoundCheck:
    """``E[f] E[g] <= E[f g]`` for nondecreasing ``f, g`` on a sorted grid."""
    x = np.asarray(grid, dtype=float)
    p, f, g = (np.asarray(a, dtype=float) for a in (p, f, g))
    if not (x.shape == p.shape == f.shape == g.shape) or x.ndim != 1:
        raise ValueError("grid, probabilities, f and g must be 1-D and of equal length")
    if np.any(np.diff(x) <= 0):
        raise ValueError("grid must be strictly increasing")
    if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
        raise ValueError("probabilities must be non-negative and sum to 1")
    for name, t in (("f", f), ("g", g)):
        if np.any(np.diff(t) < 0):
            k = int(np.flatnonzero(np.diff(t) < 0)[0])
            raise ValueError(f"{name} decreases between grid points {x[k]!r} and {x[k + 1]!r}")
    lhs = float(p @ f) * float(p @ g)
    rhs = float(p @ (f * g))
    return BoundCheck(lhs, rhs, lhs <= rhs + PROB_TOL)
