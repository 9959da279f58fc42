"""Seeded random instances shared by the property tests and the acceptance gate."""
import numpy as np

from gibbslab.model import PairPotentialModel, SpinGraph


def random_model(rng, n_sites, q, edge_prob=0.5, scale=1.0, hard_prob=0.0, connected=True):
    sites = [f"s{k}" for k in range(n_sites)]
    edges = []
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            chain = connected and j == i + 1
            if chain or rng.random() < edge_prob:
                edges.append((sites[i], sites[j]) if rng.random() < 0.5 else (sites[j], sites[i]))
    selfs = {s: rng.normal(scale=scale, size=q) for s in sites}
    pairs = {}
    for e in edges:
        t = rng.normal(scale=scale, size=(q, q))
        if hard_prob:
            # never forbid the (0, 0) pair, so the all-zero state stays admissible
            mask = rng.random((q, q)) < hard_prob
            mask[0, 0] = False
            t[mask] = np.inf
        pairs[e] = t
    return PairPotentialModel(SpinGraph(sites, edges), q, selfs, pairs)


def random_subset(rng, items, min_size=0, max_size=None):
    items = list(items)
    hi = len(items) if max_size is None else min(max_size, len(items))
    k = int(rng.integers(min_size, hi + 1))
    pick = sorted(rng.choice(len(items), size=k, replace=False)) if k else []
    return [items[i] for i in pick]


def random_distribution(rng, size, sparsity=0.0):
    p = rng.random(size) ** 3
    if sparsity:
        p[rng.random(size) < sparsity] = 0.0
    if p.sum() == 0:
        p[int(rng.integers(size))] = 1.0
    return p / p.sum()


def random_joint(rng, n_rows, n_cols, sparsity=0.0):
    return random_distribution(rng, n_rows * n_cols, sparsity).reshape(n_rows, n_cols)


def random_boundary(rng, model, volume):
    return {s: int(rng.integers(model.q)) for s in model.graph.boundary(volume)}


def random_blocks(rng, volume, extra_sites=(), max_blocks=4):
    """Random covering block system; some blocks may reach outside the volume."""
    from gibbslab.dynamics import BlockSystem

    volume = list(volume)
    n = int(rng.integers(1, max_blocks + 1))
    blocks = []
    for _ in range(n):
        b = random_subset(rng, volume, 1, 3)
        if extra_sites and rng.random() < 0.3:
            b.append(extra_sites[int(rng.integers(len(extra_sites)))])
        blocks.append(tuple(b))
    covered = {s for b in blocks for s in b}
    for s in volume:
        if s not in covered:
            blocks.append((s,))
    weights = tuple(float(w) for w in rng.uniform(0.2, 2.0, size=len(blocks)))
    return BlockSystem(tuple(volume), tuple(blocks), weights)
