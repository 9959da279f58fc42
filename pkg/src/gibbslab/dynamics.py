"""Heat-bath block dynamics and the coupling-advance operator.

States are configurations of a volume ``Psi`` with the outside held fixed.
A block update resamples ``Theta_i & Psi`` from the specification given
everything else; a weighted mixture over an index set ``S`` picks block ``i``
with probability ``w_i / w_S`` where ``w_S = sum_{i in S} w_i``.

Kernels are stored as CSR sparse matrices (each row has ``q**|block|``
nonzeros); couplings are dense.
"""
from __future__ import annotations

import bisect
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .couplings import Coupling, independent_joint, optimal_joint
from .errors import ModelError, PartitionFunctionError
from .model import PairPotentialModel, energy_vector, specification
from .spaces import PROB_TOL, ConfigSpace, FiniteDistribution, Site, format_configuration

STRATEGIES = ("optimal", "independent")


@dataclass(frozen=True)
class BlockSystem:
    """Blocks ``Theta_i`` with positive weights over a volume ``Psi``.

    Blocks may reach outside ``Psi``; only ``Theta_i & Psi`` is ever updated.
    Every block must meet ``Psi`` and every site of ``Psi`` must be covered.
    """

    volume: tuple
    blocks: tuple
    weights: tuple = field(default=None)
    require_cover: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        vol = tuple(self.volume)
        blocks = tuple(tuple(b) for b in self.blocks)
        weights = tuple(float(w) for w in (self.weights if self.weights is not None else [1.0] * len(blocks)))
        object.__setattr__(self, "volume", vol)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "weights", weights)
        if not blocks:
            raise ModelError("a block system needs at least one block")
        if len(weights) != len(blocks):
            raise ModelError(f"{len(blocks)} blocks but {len(weights)} weights")
        inside = set(vol)
        for i, (b, w) in enumerate(zip(blocks, weights)):
            if not w > 0:
                raise ModelError(f"block {i}: weight must be positive, got {w!r}")
            if not inside & set(b):
                raise ModelError(f"block {i}: {b!r} does not meet the volume")
        uncovered = inside - {s for b in blocks for s in b}
        if uncovered and self.require_cover:
            raise ModelError(f"sites {sorted(map(str, uncovered))} lie in no block")

    @classmethod
    def single_sites(cls, volume: Sequence[Site]) -> BlockSystem:
        return cls(tuple(volume), tuple((s,) for s in volume))

    def __len__(self):
        return len(self.blocks)

    def update_sites(self, i: int) -> tuple:
        """``Theta_i & Psi`` in volume order."""
        b = set(self.blocks[i])
        return tuple(s for s in self.volume if s in b)

    def membership(self, site: Site) -> tuple:
        """``B(site)``: indices of the blocks containing ``site``."""
        return tuple(i for i, b in enumerate(self.blocks) if site in b)

    def weight(self, subset: Iterable[int]) -> float:
        return float(sum(self.weights[i] for i in subset))

    def resolve(self, subset: Iterable[int] | None) -> tuple:
        s = tuple(range(len(self.blocks))) if subset is None else tuple(subset)
        if not s:
            raise ModelError("the block index set S must be nonempty")
        for i in s:
            if not 0 <= i < len(self.blocks):
                raise ModelError(f"block index {i} out of range 0..{len(self.blocks) - 1}")
        if len(set(s)) != len(s):
            raise ModelError(f"block index set {s!r} has repeats")
        return s


class _BlockUpdate:
    """Index bookkeeping for resampling ``delta`` inside ``space``.

    ``members[r, b]`` is the full index of the state whose restriction to the
    other sites has index ``r`` and whose block values have index ``b``.
    """

    def __init__(self, space: ConfigSpace, delta: Sequence[Site]):
        self.space = space
        self.delta = tuple(delta)
        dset = set(self.delta)
        self.rest = tuple(s for s in space.sites if s not in dset)
        self.rest_idx = space.sub_index(self.rest)
        self.block_idx = space.sub_index(self.delta)
        q = space.q
        self.members = np.empty((q ** len(self.rest), q ** len(self.delta)), dtype=np.int64)
        self.members[self.rest_idx, self.block_idx] = np.arange(space.size)

    def conditionals(self, model: PairPotentialModel, exterior: Mapping[Site, int]) -> np.ndarray:
        """Block law for each restriction ``r``; rows with zero partition function are NaN."""
        h = energy_vector(model, self.delta, self.space, exterior)[self.members]
        logw = -h
        top = logw.max(axis=1, keepdims=True)
        dead = top[:, 0] == -np.inf
        top[dead] = 0.0
        w = np.exp(logw - top)
        with np.errstate(invalid="ignore"):
            p = w / w.sum(axis=1, keepdims=True)
        p[dead] = np.nan
        return p


def _row_law(table: np.ndarray, r: int, update: _BlockUpdate) -> np.ndarray:
    p = table[r]
    if np.isnan(p[0]):
        shown = format_configuration(update.rest, ConfigSpace(update.rest, update.space.q).decode(int(r)))
        raise PartitionFunctionError(
            f"zero conditional partition function on block {update.delta!r} given [{shown}]"
        )
    return p


class BlockKernel:
    """Transition matrix on the configurations of a volume."""

    __slots__ = ("space", "matrix")

    def __init__(self, space: ConfigSpace, matrix):
        self.space = space
        self.matrix = sparse.csr_matrix(matrix)

    def row(self, idx: int) -> FiniteDistribution:
        return FiniteDistribution(self.space, self.matrix.getrow(idx).toarray().ravel())

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def nonzero(self):
        m = self.matrix.tocoo()
        order = np.lexsort((m.col, m.row))
        return [(int(m.row[k]), int(m.col[k]), float(m.data[k])) for k in order]


def _update_sites(space: ConfigSpace, block: Iterable[Site]) -> tuple:
    b = set(block)
    return tuple(s for s in space.sites if s in b)


def _volume_space(model: PairPotentialModel, volume: Iterable[Site]) -> ConfigSpace:
    return model.space(volume)


def heat_bath_kernel(
    model: PairPotentialModel, volume: Iterable[Site], exterior: Mapping[Site, int], block: Iterable[Site]
) -> BlockKernel:
    """Kernel resampling ``block & volume`` from its conditional law, rest frozen."""
    space = _volume_space(model, volume)
    block = tuple(block)
    delta = _update_sites(space, block)
    if not delta:
        raise ModelError(f"block {block!r} does not meet the volume")
    upd = _BlockUpdate(space, delta)
    table = upd.conditionals(model, exterior)
    if np.isnan(table).any():
        _row_law(table, int(np.flatnonzero(np.isnan(table[:, 0]))[0]), upd)
    nb = table.shape[1]
    rows = np.repeat(np.arange(space.size), nb)
    cols = upd.members[upd.rest_idx].ravel()
    data = table[upd.rest_idx].ravel()
    mat = sparse.csr_matrix((data, (rows, cols)), shape=(space.size, space.size))
    return BlockKernel(space, mat)


def block_kernels(
    model: PairPotentialModel, blocks: BlockSystem, exterior: Mapping[Site, int]
) -> list[BlockKernel]:
    return [heat_bath_kernel(model, blocks.volume, exterior, blocks.update_sites(i)) for i in range(len(blocks))]


def mixed_kernel(kernels: Sequence[BlockKernel], blocks: BlockSystem, subset: Iterable[int] | None = None) -> BlockKernel:
    """``w_S^{-1} sum_{i in S} w_i kappa_i``; ``kernels`` is indexed like ``blocks``."""
    s = blocks.resolve(subset)
    w_s = blocks.weight(s)
    space = kernels[s[0]].space
    acc = None
    for i in s:
        space.require_same(kernels[i].space, "kernel spaces")
        term = (blocks.weights[i] / w_s) * kernels[i].matrix
        acc = term if acc is None else acc + term
    return BlockKernel(space, acc)


# ---------------------------------------------------------------------------
# Coupled kernels


class CoupledDynamics:
    """Coupled block updates for one volume, block system and pair of exteriors.

    Conditional tables are computed once per (block, exterior); every
    coupled cell is then a small ``q**|block|`` square coupling embedded at
    the rows/columns that agree with the two sources off the block.
    """

    def __init__(
        self,
        model: PairPotentialModel,
        blocks: BlockSystem,
        exterior_a: Mapping[Site, int],
        exterior_b: Mapping[Site, int] | None = None,
        strategy: str = "optimal",
    ):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown coupling strategy {strategy!r}; expected one of {STRATEGIES}")
        self.model = model
        self.blocks = blocks
        self.space = _volume_space(model, blocks.volume)
        self.exterior_a = dict(exterior_a)
        self.exterior_b = dict(exterior_a if exterior_b is None else exterior_b)
        self.strategy = strategy
        self._joint = optimal_joint if strategy == "optimal" else independent_joint
        self.updates = [_BlockUpdate(self.space, _update_sites(self.space, b)) for b in blocks.blocks]
        self._cells = {}

    @cached_property
    def tables_a(self) -> list:
        return [u.conditionals(self.model, self.exterior_a) for u in self.updates]

    @cached_property
    def tables_b(self) -> list:
        if self.exterior_b == self.exterior_a:
            return self.tables_a
        return [u.conditionals(self.model, self.exterior_b) for u in self.updates]

    def kernel_row(self, i: int, side: str, idx: int) -> np.ndarray:
        upd = self.updates[i]
        table = self.tables_a[i] if side == "a" else self.tables_b[i]
        return _row_law(table, int(upd.rest_idx[idx]), upd)

    def cell(self, i: int, a: int, b: int):
        """``(rows, cols, C)`` for block ``i`` and sources ``a`` (side A) and ``b`` (side B)."""
        upd = self.updates[i]
        ra, rb = int(upd.rest_idx[a]), int(upd.rest_idx[b])
        key = (i, ra, rb)
        joint = self._cells.get(key)
        if joint is None:
            pa = _row_law(self.tables_a[i], ra, upd)
            pb = _row_law(self.tables_b[i], rb, upd)
            joint = self._joint(pa, pb)
            self._cells[key] = joint
        return upd.members[ra], upd.members[rb], joint

    def block_coupling(self, i: int, a: int, b: int) -> Coupling:
        rows, cols, c = self.cell(i, a, b)
        out = np.zeros((self.space.size, self.space.size))
        out[np.ix_(rows, cols)] = c
        return Coupling(self.space, self.space, out)

    def mixed_coupling(self, a: int, b: int, subset: Iterable[int] | None = None) -> Coupling:
        s = self.blocks.resolve(subset)
        w_s = self.blocks.weight(s)
        out = np.zeros((self.space.size, self.space.size))
        for i in s:
            rows, cols, c = self.cell(i, a, b)
            out[np.ix_(rows, cols)] += (self.blocks.weights[i] / w_s) * c
        return Coupling(self.space, self.space, out)

    def expected_distance(self, i: int, a: int, b: int, rho, sites: Iterable[Site]) -> float:
        """``E[rho_sites]`` after coupled update of block ``i`` from ``(a, b)``, without densifying."""
        upd = self.updates[i]
        sites = set(sites)
        da, db = self.space.digits[a], self.space.digits[b]
        fixed = 0.0
        for s in upd.rest:
            if s in sites:
                k = self.space.position(s)
                fixed += rho[s][da[k], db[k]]
        _, _, c = self.cell(i, a, b)
        inner = [s for s in upd.delta if s in sites]
        if not inner:
            return fixed
        sub = ConfigSpace(upd.delta, self.space.q)
        cost = np.zeros((sub.size, sub.size))
        for s in inner:
            k = sub.position(s)
            col = sub.digits[:, k]
            cost += rho[s][col[:, None], col[None, :]]
        return fixed + float((c * cost).sum())


def _as_index(space: ConfigSpace, config: Mapping[Site, int]) -> int:
    return space.index(config)


def coupled_block_kernel(
    model: PairPotentialModel,
    volume: Iterable[Site],
    block: Iterable[Site],
    strategy: str,
    eta: Mapping[Site, int],
    xi: Mapping[Site, int],
) -> Coupling:
    """``K_i(eta, xi)``: couple the heat-bath updates of ``block`` from two full configurations.

    ``eta`` and ``xi`` assign the volume and (at least) its outer boundary;
    each side's exterior is read from its own configuration.
    """
    space = _volume_space(model, volume)
    blocks = BlockSystem(space.sites, (tuple(block),), require_cover=False)
    dyn = CoupledDynamics(model, blocks, eta, xi, strategy)
    return dyn.block_coupling(0, _as_index(space, eta), _as_index(space, xi))


def coupled_mixed_kernel(
    model: PairPotentialModel,
    blocks: BlockSystem,
    subset: Iterable[int] | None,
    strategy: str,
    eta: Mapping[Site, int],
    xi: Mapping[Site, int],
) -> Coupling:
    """``K_S(eta, xi) = w_S^{-1} sum_{i in S} w_i K_i(eta, xi)``."""
    dyn = CoupledDynamics(model, blocks, eta, xi, strategy)
    return dyn.mixed_coupling(_as_index(dyn.space, eta), _as_index(dyn.space, xi), subset)


def advance_coupling(
    Q: Coupling,
    model: PairPotentialModel,
    blocks: BlockSystem,
    sigma: Mapping[Site, int],
    tau: Mapping[Site, int],
    subset: Iterable[int] | None = None,
    strategy: str = "optimal",
    steps: int = 1,
) -> Coupling:
    """Apply ``F_S(Q)(a', b') = sum_{a,b} Q(a, b) K_S(a, b)(a', b')`` ``steps`` times.

    ``Q`` must couple ``gamma_Psi^sigma`` and ``gamma_Psi^tau``; the result
    does too.
    """
    s = blocks.resolve(subset)
    dyn = CoupledDynamics(model, blocks, sigma, tau, strategy)
    mu = specification(model, blocks.volume, sigma)
    nu = specification(model, blocks.volume, tau)
    residual = Q.marginal_residual(mu, nu)
    if residual > PROB_TOL:
        raise ModelError(f"input coupling marginals miss the specifications by {residual:.3g}")
    w_s = blocks.weight(s)
    coeff = [blocks.weights[i] / w_s for i in s]
    joint = Q.joint
    n = dyn.space.size
    for _ in range(steps):
        out = np.zeros((n, n))
        rows, cols = np.nonzero(joint)
        for a, b in zip(rows, cols):
            m = joint[a, b]
            for i, c in zip(s, coeff):
                r, k, cell = dyn.cell(i, int(a), int(b))
                out[np.ix_(r, k)] += (m * c) * cell
        joint = out
    return Coupling(dyn.space, dyn.space, joint)


def stationarity_check(
    model: PairPotentialModel,
    volume: Iterable[Site],
    exterior: Mapping[Site, int],
    blocks: BlockSystem,
    subset: Iterable[int] | None = None,
) -> float:
    """Sup-norm of ``gamma kappa_S - gamma``."""
    if set(volume) != set(blocks.volume):
        raise ModelError("volume and block system volume differ")
    gamma = specification(model, volume, exterior)
    kernel = mixed_kernel(block_kernels(model, blocks, exterior), blocks, subset)
    gamma.space.require_same(kernel.space, "specification and kernel spaces")
    moved = kernel.matrix.T @ gamma.probs
    return float(np.abs(moved - gamma.probs).max())


# ---------------------------------------------------------------------------
# Simulation


def run_chain(
    model: PairPotentialModel,
    volume: Iterable[Site],
    exterior: Mapping[Site, int],
    blocks: BlockSystem,
    subset: Iterable[int] | None,
    steps: int,
    seed: int,
    start: Mapping[Site, int] | None = None,
) -> np.ndarray:
    """State indices after each of ``steps`` heat-bath moves.

    Without ``start`` the chain begins at the lowest-index admissible state.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    space = _volume_space(model, volume)
    energies = energy_vector(model, space.sites, space, exterior)
    if start is None:
        ok = np.flatnonzero(np.isfinite(energies))
        if ok.size == 0:
            raise PartitionFunctionError(f"no admissible configuration of {space.sites!r}")
        state = int(ok[0])
    else:
        state = space.index(start)
        if not np.isfinite(energies[state]):
            raise ModelError(f"infeasible start state [{space.label(state)}]")
    s = blocks.resolve(subset)
    w = np.array([blocks.weights[i] for i in s])
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(s), size=steps, p=w / w.sum())
    draws = rng.random(steps)

    updates = [_BlockUpdate(space, _update_sites(space, blocks.blocks[i])) for i in s]
    tables = [u.conditionals(model, exterior) for u in updates]
    cums = [np.cumsum(t, axis=1).tolist() for t in tables]
    rests = [u.rest_idx.tolist() for u in updates]
    members = [u.members.tolist() for u in updates]

    out = np.empty(steps, dtype=np.int64)
    for t in range(steps):
        j = picks[t]
        r = rests[j][state]
        cum = cums[j][r]
        if cum[-1] != cum[-1]:
            _row_law(tables[j], r, updates[j])
        b = bisect.bisect_right(cum, draws[t] * cum[-1])
        if b >= len(cum):
            b = len(cum) - 1
        while tables[j][r, b] == 0:
            b -= 1
        state = members[j][r][b]
        out[t] = state
    return out


def simulate_dynamics(
    model: PairPotentialModel,
    volume: Iterable[Site],
    exterior: Mapping[Site, int],
    blocks: BlockSystem,
    subset: Iterable[int] | None,
    steps: int,
    seed: int,
    burn_in: int | None = None,
    start: Mapping[Site, int] | None = None,
) -> FiniteDistribution:
    """Occupancy frequencies of a seeded heat-bath chain after ``burn_in`` steps (default ``steps // 10``)."""
    path = run_chain(model, volume, exterior, blocks, subset, steps, seed, start)
    burn = steps // 10 if burn_in is None else burn_in
    if not 0 <= burn < steps:
        raise ValueError(f"burn-in must lie in [0, {steps}), got {burn}")
    space = _volume_space(model, volume)
    counts = np.bincount(path[burn:], minlength=space.size)
    return FiniteDistribution(space, counts / counts.sum())
