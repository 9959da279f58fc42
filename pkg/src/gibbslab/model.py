"""Pair-potential spin models on finite graphs and their Gibbs specifications.

Conventions
-----------
* Weights are ``exp(-H)``.  Inverse temperature and field signs live inside
  the potential tables; the engine never sees a ``beta``.
* ``+inf`` energies mark forbidden configurations (hard constraints).
* ``H_A(sigma)`` sums the self terms of the sites in ``A`` and the pair terms
  of every edge touching ``A``.  Summation order is fixed: self terms in graph
  site order, then edge terms in declared edge order, accumulated left to
  right from ``0.0``.  The scalar and vectorised paths use the same order and
  therefore agree bit for bit.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ModelError, PartitionFunctionError
from .spaces import (
    MAX_STATES,
    ConfigSpace,
    Configuration,
    FiniteDistribution,
    Site,
    check_size,
    format_configuration,
)

Volume = tuple


@dataclass(frozen=True, eq=False)
class SpinGraph:
    """Sites in a fixed total order plus undirected edges.

    Each edge is stored once, with the endpoint order in which it was declared.
    """

    sites: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))

    def __eq__(self, other):
        return isinstance(other, SpinGraph) and self.sites == other.sites and self.edges == other.edges

    __hash__ = None

    @cached_property
    def order(self) -> dict:
        return {s: k for k, s in enumerate(self.sites)}

    @cached_property
    def adjacency(self) -> dict:
        adj = {s: [] for s in self.sites}
        for x, y in self.edges:
            adj.setdefault(x, []).append(y)
            adj.setdefault(y, []).append(x)
        return adj

    def neighbors(self, site: Site) -> list:
        return self.adjacency.get(site, [])

    def volume(self, sites: Iterable[Site]) -> Volume:
        """Canonicalise a site collection to graph order, rejecting unknown sites."""
        sites = set(sites)
        unknown = [s for s in sites if s not in self.order]
        if unknown:
            raise ModelError(f"unknown sites {sorted(map(str, unknown))}")
        return tuple(sorted(sites, key=self.order.__getitem__))

    def boundary(self, volume: Iterable[Site]) -> Volume:
        """Sites outside ``volume`` adjacent to it, in graph order."""
        inside = set(volume)
        out = {y for x in inside for y in self.neighbors(x) if y not in inside}
        return self.volume(out)

    def bfs_order(self, root: Site) -> list:
        """Sites reachable from ``root`` by graph distance, ties broken by site order."""
        seen = {root}
        frontier = [root]
        out = [root]
        while frontier:
            nxt = sorted({y for x in frontier for y in self.neighbors(x) if y not in seen}, key=self.order.__getitem__)
            seen.update(nxt)
            out.extend(nxt)
            frontier = nxt
        return out


@dataclass(frozen=True, eq=False)
class PairPotentialModel:
    """Graph, alphabet ``0..q-1`` and self/pair energy tables.

    ``self_potentials[x]`` has shape ``(q,)``; ``pair_potentials[(x, y)]`` has
    shape ``(q, q)`` and is indexed ``[value_x, value_y]`` for the declared
    endpoint order.  Use :meth:`pair_table` to query either orientation.
    Construction does not validate; see :func:`validate_model`.
    """

    graph: SpinGraph
    q: int
    self_potentials: Mapping = field(default_factory=dict)
    pair_potentials: Mapping = field(default_factory=dict)

    def __post_init__(self):
        selfs = {s: _frozen(t) for s, t in self.self_potentials.items()}
        pairs = {tuple(e): _frozen(t) for e, t in self.pair_potentials.items()}
        object.__setattr__(self, "self_potentials", selfs)
        object.__setattr__(self, "pair_potentials", pairs)

    def __eq__(self, other):
        if not isinstance(other, PairPotentialModel):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.q == other.q
            and _tables_equal(self.self_potentials, other.self_potentials)
            and _tables_equal(self.pair_potentials, other.pair_potentials)
        )

    __hash__ = None

    @property
    def sites(self) -> tuple:
        return self.graph.sites

    def self_table(self, x: Site) -> np.ndarray:
        return self.self_potentials[x]

    def pair_table(self, x: Site, y: Site) -> np.ndarray:
        """Table indexed ``[value_x, value_y]`` whichever way the edge was declared."""
        t = self.pair_potentials.get((x, y))
        if t is not None:
            return t
        return self.pair_potentials[(y, x)].T

    def volume(self, sites: Iterable[Site]) -> Volume:
        return self.graph.volume(sites)

    def space(self, sites: Iterable[Site], cap: int = MAX_STATES) -> ConfigSpace:
        vol = self.volume(sites)
        check_size(self.q, len(vol), cap)
        return ConfigSpace(vol, self.q)


def _frozen(table) -> np.ndarray:
    a = np.array(table, dtype=float)
    a.setflags(write=False)
    return a


def _tables_equal(a: Mapping, b: Mapping) -> bool:
    if list(a) != list(b):
        return False
    return all(a[k].shape == b[k].shape and np.array_equal(a[k], b[k]) for k in a)


def validate_model(model: PairPotentialModel) -> list[str]:
    """Return one located message per violated invariant; empty means valid."""
    out = []
    g = model.graph
    q = model.q
    if not isinstance(q, (int, np.integer)) or q < 1:
        out.append(f"alphabet: size must be a positive integer, got {q!r}")
        q = None
    if len(set(g.sites)) != len(g.sites):
        dup = sorted({str(s) for s in g.sites if g.sites.count(s) > 1})
        out.append(f"graph: duplicate sites {dup}")
    declared = set(g.sites)
    seen_edges = set()
    for e in g.edges:
        if len(e) != 2:
            out.append(f"edge {e!r}: must have exactly two endpoints")
            continue
        x, y = e
        if x == y:
            out.append(f"edge {e!r}: self-loop")
        for end in (x, y):
            if end not in declared:
                out.append(f"edge {e!r}: endpoint {end!r} is not a declared site")
        key = frozenset(e)
        if key in seen_edges:
            out.append(f"edge {e!r}: declared more than once")
        seen_edges.add(key)
    for s in g.sites:
        t = model.self_potentials.get(s)
        if t is None:
            out.append(f"self potential for site {s!r}: missing")
        elif q is not None and t.shape != (q,):
            out.append(f"self potential for site {s!r}: shape {t.shape}, expected ({q},)")
        elif _bad_entries(t):
            out.append(f"self potential for site {s!r}: entries must be finite or +inf")
    for s in model.self_potentials:
        if s not in declared:
            out.append(f"self potential for site {s!r}: site is not declared")
    edge_keys = [tuple(e) for e in g.edges if len(e) == 2]
    for e in edge_keys:
        t = model.pair_potentials.get(e)
        if t is None:
            out.append(f"pair potential for edge {e!r}: missing")
        elif q is not None and t.shape != (q, q):
            out.append(f"pair potential for edge {e!r}: shape {t.shape}, expected ({q}, {q})")
        elif _bad_entries(t):
            out.append(f"pair potential for edge {e!r}: entries must be finite or +inf")
    for e in model.pair_potentials:
        if e not in edge_keys:
            out.append(f"pair potential for edge {e!r}: not a declared edge (or declared in the other order)")
    return out


def _bad_entries(t: np.ndarray) -> bool:
    return bool(np.any(np.isnan(t)) or np.any(t == -np.inf))


def check_model(model: PairPotentialModel) -> None:
    problems = validate_model(model)
    if problems:
        raise ModelError("invalid model: " + "; ".join(problems))


def _terms(model: PairPotentialModel, self_sites: Iterable[Site], edge_filter) -> tuple[list, list]:
    self_sites = set(self_sites)
    selfs = [s for s in model.graph.sites if s in self_sites]
    edges = [e for e in model.graph.edges if edge_filter(e)]
    return selfs, edges


def _hamiltonian_terms(model, volume):
    vol = set(volume)
    return _terms(model, vol, lambda e: e[0] in vol or e[1] in vol)


def _boundary_terms(model, big, small):
    big, small = set(big), set(small)
    return _terms(
        model,
        big - small,
        lambda e: (e[0] in big or e[1] in big) and e[0] not in small and e[1] not in small,
    )


def _scalar_energy(model, selfs, edges, sigma: Mapping) -> float:
    e = 0.0
    try:
        for s in selfs:
            e += float(model.self_potentials[s][sigma[s]])
        for x, y in edges:
            e += float(model.pair_potentials[(x, y)][sigma[x], sigma[y]])
    except KeyError as exc:
        raise ModelError(f"configuration does not assign site {exc.args[0]!r}") from None
    return e


def hamiltonian(model: PairPotentialModel, volume: Iterable[Site], sigma: Mapping[Site, int]) -> float:
    """``H_volume(sigma)``; ``+inf`` when a hard constraint is violated."""
    selfs, edges = _hamiltonian_terms(model, model.volume(volume))
    return _scalar_energy(model, selfs, edges, sigma)


def boundary_hamiltonian(
    model: PairPotentialModel, outer: Iterable[Site], inner: Iterable[Site], sigma: Mapping[Site, int]
) -> float:
    """Terms of ``H_outer`` that do not touch ``inner``.

    ``H_outer = H_inner + boundary_hamiltonian(outer, inner)`` and the result
    depends on ``sigma`` only off ``inner``.
    """
    outer, inner = model.volume(outer), model.volume(inner)
    if not set(inner) <= set(outer):
        raise ModelError(f"inner volume {inner!r} is not contained in {outer!r}")
    selfs, edges = _boundary_terms(model, outer, inner)
    return _scalar_energy(model, selfs, edges, sigma)


def energy_vector(
    model: PairPotentialModel, volume: Iterable[Site], space: ConfigSpace, boundary: Mapping[Site, int]
) -> np.ndarray:
    """``H_volume`` evaluated on every configuration of ``space``.

    Sites of ``space`` take their values from the enumerated configuration;
    all other sites that appear in a term are read from ``boundary``.
    """
    selfs, edges = _hamiltonian_terms(model, model.volume(volume))
    digits = space.digits
    pos = {s: k for k, s in enumerate(space.sites)}

    def column(s):
        if s in pos:
            return digits[:, pos[s]]
        try:
            v = boundary[s]
        except KeyError:
            raise ModelError(f"boundary condition does not assign site {s!r}") from None
        if not 0 <= v < model.q:
            raise ModelError(f"boundary value {v!r} at site {s!r} outside 0..{model.q - 1}")
        return v

    acc = np.zeros(space.size)
    for s in selfs:
        acc += model.self_potentials[s][column(s)]
    for x, y in edges:
        acc += model.pair_potentials[(x, y)][column(x), column(y)]
    return acc


def normalized_weights(energies: np.ndarray) -> np.ndarray | None:
    """``exp(-E)/Z`` with max-shifted log-weights; ``None`` when ``Z == 0``."""
    logw = -energies
    top = logw.max(initial=-np.inf)
    if top == -np.inf:
        return None
    w = np.exp(logw - top)
    return w / w.sum()


def specification(
    model: PairPotentialModel, volume: Iterable[Site], boundary: Mapping[Site, int] | None = None
) -> FiniteDistribution:
    """Gibbs specification over ``volume`` given the outside configuration.

    Only the sites adjacent to ``volume`` are read from ``boundary``.
    """
    boundary = {} if boundary is None else boundary
    space = model.space(volume)
    p = normalized_weights(energy_vector(model, space.sites, space, boundary))
    if p is None:
        outside = model.graph.boundary(space.sites)
        shown = format_configuration(outside, [boundary.get(s, "?") for s in outside])
        raise PartitionFunctionError(
            f"zero partition function on volume {space.sites!r} with boundary [{shown}]"
        )
    return FiniteDistribution(space, p)


def condition_specification(
    model: PairPotentialModel,
    volume: Iterable[Site],
    boundary: Mapping[Site, int],
    inner: Iterable[Site],
    tau: Mapping[Site, int],
) -> FiniteDistribution:
    """Condition ``specification(volume, boundary)`` on ``tau`` over ``volume \\ inner``.

    Computed by restricting the joint table and renormalising, not by calling
    the specification on ``inner``; the two agree by the consistency identity.
    """
    full = specification(model, volume, boundary)
    space = full.space
    inner = model.volume(inner)
    if not set(inner) <= set(space.sites):
        raise ModelError(f"inner volume {inner!r} is not contained in {space.sites!r}")
    fixed = [s for s in space.sites if s not in set(inner)]
    try:
        base = sum(int(tau[s]) * int(space.radix[space.position(s)]) for s in fixed)
    except KeyError as exc:
        raise ModelError(f"conditioning configuration does not assign site {exc.args[0]!r}") from None
    sub = ConfigSpace(inner, model.q)
    inner_radix = np.array([space.radix[space.position(s)] for s in inner], dtype=np.int64)
    idx = base + (sub.digits @ inner_radix if inner else np.zeros(1, dtype=np.int64))
    mass = full.probs[idx]
    total = mass.sum()
    if total == 0:
        shown = format_configuration(fixed, [tau[s] for s in fixed])
        raise PartitionFunctionError(f"conditioning event [{shown}] has probability zero")
    return FiniteDistribution(sub, mass / total)


def enumerate_volume(model: PairPotentialModel, volume: Iterable[Site], cap: int = MAX_STATES) -> ConfigSpace:
    """Indexed, lazily materialised list of all configurations of ``volume``."""
    return model.space(volume, cap)


# ---------------------------------------------------------------------------
# Constructors for the standard models


def path_graph(n: int, prefix: str = "x") -> SpinGraph:
    sites = [f"{prefix}{k}" for k in range(n)]
    return SpinGraph(sites, list(zip(sites, sites[1:])))


def grid_graph(rows: int, cols: int) -> SpinGraph:
    sites = [f"r{i}c{j}" for i in range(rows) for j in range(cols)]
    edges = []
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                edges.append((f"r{i}c{j}", f"r{i}c{j + 1}"))
            if i + 1 < rows:
                edges.append((f"r{i}c{j}", f"r{i + 1}c{j}"))
    return SpinGraph(sites, edges)


def ising_model(graph: SpinGraph, beta: float, field: float = 0.0) -> PairPotentialModel:
    """Value ``a`` is spin ``2a - 1``; ``U_xy = -beta s s'`` and ``U_x = -field s``."""
    s = np.array([-1.0, 1.0])
    pair = -beta * np.outer(s, s)
    return PairPotentialModel(
        graph, 2, {x: -field * s for x in graph.sites}, {e: pair for e in graph.edges}
    )


def hardcore_model(graph: SpinGraph, fugacity: float = 1.0) -> PairPotentialModel:
    """Independent sets: value 1 is occupied, adjacent occupied sites are forbidden."""
    pair = np.array([[0.0, 0.0], [0.0, np.inf]])
    single = np.array([0.0, -np.log(fugacity)])
    return PairPotentialModel(graph, 2, {x: single for x in graph.sites}, {e: pair for e in graph.edges})


def zero_model(graph: SpinGraph, q: int = 2) -> PairPotentialModel:
    return PairPotentialModel(
        graph, q, {x: np.zeros(q) for x in graph.sites}, {e: np.zeros((q, q)) for e in graph.edges}
    )


def restrict(config: Mapping[Site, int], sites: Sequence[Site]) -> Configuration:
    return Configuration.from_mapping(tuple(sites), config)
