"""Random trees for property tests and experiments."""
from __future__ import annotations

import random

from .core import Split, TaxonSet, Tree


def random_topology(taxa: TaxonSet, rng: random.Random) -> list[Split]:
    """Interior splits of a uniformly built binary tree (random stepwise addition)."""
    n = taxa.n
    order = list(range(n))
    rng.shuffle(order)
    if n < 4:
        return []
    # edges as (child-side leaf mask) on a tree rooted at order[0]; each
    # insertion subdivides a random edge
    first = order[:3]
    edges = [1 << first[1], 1 << first[2]]  # pendant edges below the root leaf's node
    # edges are stored by the mask of leaves below them, rooted at leaf order[0]
    for leaf in order[3:]:
        e = rng.randrange(len(edges))
        below = edges[e]
        bit = 1 << leaf
        # new internal vertex on edge e: the edge above it gains the new leaf
        new_edges = []
        for m in edges:
            if m & below == below and m != below:
                new_edges.append(m | bit)
            else:
                new_edges.append(m)
        new_edges.append(below | bit)
        new_edges.append(bit)
        edges = new_edges
    full = taxa.full_mask
    out = set()
    for m in edges:
        k = bin(m).count("1")
        if 2 <= k <= n - 2:
            out.add(Split(m, taxa))
    return sorted(out)


def random_tree(
    taxa: TaxonSet,
    rng: random.Random,
    *,
    collapse: float = 0.0,
    low: float = 0.0,
    high: float = 10.0,
    pendant: bool = True,
) -> Tree:
    """A random tree; each interior edge is dropped with probability ``collapse``."""
    splits = [s for s in random_topology(taxa, rng) if rng.random() >= collapse]
    weights = {s: rng.uniform(low, high) for s in splits}
    weights = {s: w for s, w in weights.items() if w > 1e-9}
    pend = [rng.uniform(low, high) for _ in range(taxa.n)] if pendant else None
    return Tree(taxa, weights, pend)


def make_taxa(n: int) -> TaxonSet:
    return TaxonSet([f"t{i}" for i in range(n)])
