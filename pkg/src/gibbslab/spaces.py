"""Indexed configuration spaces and exact finite distributions.

Indexing rule (frozen): a configuration of the ordered sites ``(s_0, ..., s_{n-1})``
with values ``(v_0, ..., v_{n-1})`` has index ``sum(v_k * q**k)``, i.e. a
little-endian mixed-radix number in which the first declared site varies
fastest.  For ``q=2`` and sites ``(x, y)`` the order is ``00, 10, 01, 11``.
"""
from __future__ import annotations

from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ModelError, SpaceMismatch, StateSpaceTooLarge

#: Absolute tolerance used for every equality assertion on probabilities.
PROB_TOL = 1e-12

#: Default cap on the number of enumerated states.
MAX_STATES = 2**24

Site = Hashable


class Configuration(Mapping):
    """An assignment of one spin value to every site of a volume.

    Behaves as a read-only ``{site: value}`` mapping, so it can be passed
    anywhere a boundary condition is expected.
    """

    __slots__ = ("sites", "values", "_lookup")

    def __init__(self, sites: Sequence[Site], values: Sequence[int]):
        sites = tuple(sites)
        values = tuple(int(v) for v in values)
        if len(sites) != len(values):
            raise ModelError(f"{len(sites)} sites but {len(values)} values")
        self.sites = sites
        self.values = values
        self._lookup = dict(zip(sites, values))
        if len(self._lookup) != len(sites):
            raise ModelError(f"duplicate sites in configuration {sites!r}")

    @classmethod
    def from_mapping(cls, sites: Sequence[Site], mapping: Mapping[Site, int]) -> Configuration:
        return cls(sites, [mapping[s] for s in sites])

    def __getitem__(self, site):
        return self._lookup[site]

    def __iter__(self):
        return iter(self.sites)

    def __len__(self):
        return len(self.sites)

    def __eq__(self, other):
        if isinstance(other, Configuration):
            return self.sites == other.sites and self.values == other.values
        return Mapping.__eq__(self, other)

    def __hash__(self):
        return hash((self.sites, self.values))

    def __repr__(self):
        return f"Configuration({format_configuration(self.sites, self.values)!r})"

    def index(self, q: int) -> int:
        return mixed_radix_index(self.values, q)


def mixed_radix_index(values: Sequence[int], q: int) -> int:
    idx = 0
    for v in reversed(values):
        idx = idx * q + int(v)
    return idx


def format_configuration(sites: Sequence[Site], values: Sequence[int]) -> str:
    return ";".join(f"{s}={v}" for s, v in zip(sites, values))


@dataclass(frozen=True)
class ConfigSpace(Sequence):
    """All ``q**len(sites)`` configurations of an ordered tuple of sites.

    The space is lazy: it is a ``Sequence`` of :class:`Configuration` but the
    objects are only built on access.  :attr:`digits` gives the whole space as
    an integer array of shape ``(size, n_sites)``.
    """

    sites: tuple
    q: int

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        if len(set(self.sites)) != len(self.sites):
            raise ModelError(f"duplicate sites in volume {self.sites!r}")
        if self.q < 1:
            raise ModelError(f"alphabet size must be positive, got {self.q}")

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def size(self) -> int:
        return self.q**self.n_sites

    def __len__(self):
        return self.size

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return [self[i] for i in range(*idx.indices(self.size))]
        if idx < 0:
            idx += self.size
        if not 0 <= idx < self.size:
            raise IndexError(idx)
        return Configuration(self.sites, self.decode(idx))

    def decode(self, idx: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.n_sites):
            idx, v = divmod(idx, self.q)
            out.append(v)
        return tuple(out)

    def index(self, values: Mapping[Site, int] | Sequence[int]) -> int:
        if isinstance(values, Mapping):
            values = [values[s] for s in self.sites]
        if len(values) != self.n_sites:
            raise ModelError(f"expected {self.n_sites} values, got {len(values)}")
        for v in values:
            if not 0 <= int(v) < self.q:
                raise ModelError(f"spin value {v} outside 0..{self.q - 1}")
        return mixed_radix_index(values, self.q)

    def position(self, site: Site) -> int:
        return self._positions[site]

    @cached_property
    def _positions(self) -> dict:
        return {s: k for k, s in enumerate(self.sites)}

    @cached_property
    def radix(self) -> np.ndarray:
        return self.q ** np.arange(self.n_sites, dtype=np.int64)

    @cached_property
    def digits(self) -> np.ndarray:
        idx = np.arange(self.size, dtype=np.int64)
        out = (idx[:, None] // self.radix[None, :]) % self.q
        out.setflags(write=False)
        return out

    def sub_index(self, sites: Sequence[Site]) -> np.ndarray:
        """Index, within the space over ``sites``, of each configuration's restriction."""
        cols = [self.position(s) for s in sites]
        radix = self.q ** np.arange(len(cols), dtype=np.int64)
        if not cols:
            return np.zeros(self.size, dtype=np.int64)
        return self.digits[:, cols] @ radix

    def label(self, idx: int) -> str:
        return format_configuration(self.sites, self.decode(idx))

    def require_same(self, other: ConfigSpace, what: str = "spaces") -> None:
        if self != other:
            raise SpaceMismatch(f"{what} differ: {self.sites!r}/q={self.q} vs {other.sites!r}/q={other.q}")


def check_size(q: int, n_sites: int, cap: int = MAX_STATES) -> None:
    if q**n_sites > cap:
        raise StateSpaceTooLarge(f"{q}**{n_sites} = {q**n_sites} states exceeds the cap of {cap}")


class FiniteDistribution:
    """Exact probability vector over a :class:`ConfigSpace`.

    The vector is copied and frozen on construction.  Entries must be
    non-negative and sum to one within :data:`PROB_TOL`.
    """

    __slots__ = ("space", "probs")

    def __init__(self, space: ConfigSpace, probs: Iterable[float]):
        p = np.array(probs, dtype=float).reshape(-1)
        if p.shape[0] != space.size:
            raise ModelError(f"probability vector has length {p.shape[0]}, space has {space.size} states")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ModelError("probabilities must be finite and non-negative")
        total = p.sum()
        if abs(total - 1.0) > PROB_TOL:
            raise ModelError(f"probabilities sum to {total!r}, not 1")
        p.setflags(write=False)
        self.space = space
        self.probs = p

    @classmethod
    def point_mass(cls, space: ConfigSpace, idx: int) -> FiniteDistribution:
        p = np.zeros(space.size)
        p[idx] = 1.0
        return cls(space, p)

    @classmethod
    def uniform(cls, space: ConfigSpace) -> FiniteDistribution:
        return cls(space, np.full(space.size, 1.0 / space.size))

    def __len__(self):
        return self.space.size

    def __getitem__(self, idx):
        return self.probs[idx]

    def __repr__(self):
        return f"FiniteDistribution(sites={self.space.sites!r}, q={self.space.q}, probs={self.probs!r})"

    def prob(self, config: Mapping[Site, int]) -> float:
        return float(self.probs[self.space.index(config)])

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)
