"""Slow, obviously-correct reference computations used to check the fast paths.

Nothing here calls the geodesic solver: distances come from enumerating every
ordered pairing of the non-shared splits, and Fréchet minima from a compass
search over candidate orthants using those enumerated distances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Sequence

from .core import Split, Tree, compatible_masks


class OracleLimitError(ValueError):
    """Raised when an input is too large for brute force."""


@dataclass(frozen=True)
class OracleConfig:
    max_splits_per_side: int = 5
    grid_resolution: float = 1e-3
    restarts: int = 2

    def __post_init__(self):
        if self.max_splits_per_side > 8:
            raise ValueError("max_splits_per_side above 8 is not supported")


def ordered_set_partitions(items: Sequence):
    """Yield every ordered partition of ``items`` into nonempty blocks."""
    items = list(items)
    if not items:
        yield ()
        return
    n = len(items)
    # choose the first block, recurse on the rest
    for r in range(1, n + 1):
        for first in combinations(range(n), r):
            block = frozenset(items[i] for i in first)
            rest = [items[i] for i in range(n) if i not in first]
            for tail in ordered_set_partitions(rest):
                yield (block,) + tail


def _shared(T1: Tree, T2: Tree) -> set:
    out = set()
    for s in T1.splits | T2.splits:
        other = T2 if s in T1 else T1
        if s in other or all(compatible_masks(s.mask, t.mask) for t in other.splits):
            out.add(s)
    return out


def brute_force_distance(T1: Tree, T2: Tree, cfg: OracleConfig = OracleConfig()) -> float:
    """Shortest length over all supports whose orthant sequence is realisable.

    A support is realisable when later A-blocks are compatible with earlier
    B-blocks and the blocks vanish in order (nondecreasing ratios).
    """
    if T1.taxa != T2.taxa:
        raise ValueError("trees are defined over different taxa")
    shared = _shared(T1, T2)
    A = sorted(T1.splits - shared)
    B = sorted(T2.splits - shared)
    if max(len(A), len(B)) > cfg.max_splits_per_side:
        raise OracleLimitError("too many non-shared splits for brute force")
    base = sum((T1.weight(e) - T2.weight(e)) ** 2 for e in shared)
    base += sum((p - q) ** 2 for p, q in zip(T1.pendant, T2.pendant))
    if not A:
        return math.sqrt(base)

    def nrm(E, T):
        return math.sqrt(sum(T.weight(e) ** 2 for e in E))

    parts_b = {}
    for pb in ordered_set_partitions(B):
        parts_b.setdefault(len(pb), []).append(pb)
    best = math.inf
    for pa in ordered_set_partitions(A):
        for pb in parts_b.get(len(pa), ()):
            k = len(pa)
            ok = all(
                compatible_masks(a.mask, b.mask)
                for i in range(k)
                for j in range(i)
                for a in pa[i]
                for b in pb[j]
            )
            if not ok:
                continue
            na = [nrm(x, T1) for x in pa]
            nb = [nrm(x, T2) for x in pb]
            ratios = [x / y for x, y in zip(na, nb)]
            if any(r1 > r2 * (1 + 1e-12) for r1, r2 in zip(ratios, ratios[1:])):
                continue
            length = sum((x + y) ** 2 for x, y in zip(na, nb))
            best = min(best, length)
    return math.sqrt(base + best)


def frechet_value_brute(T: Tree, trees: Iterable[Tree], cfg: OracleConfig = OracleConfig()) -> float:
    return sum(brute_force_distance(T, X, cfg) ** 2 for X in trees)


def grid_frechet_min(
    trees: Sequence[Tree],
    candidate_orthants: Iterable[Iterable[Split]],
    cfg: OracleConfig = OracleConfig(),
) -> Tree:
    """Minimise the Fréchet function over a few closed orthants by direct search.

    Each orthant is scanned on a coarse grid, then a compass search halves its
    step down to ``cfg.grid_resolution``.  Interior weights only; pendant
    lengths of the result are the input averages.
    """
    trees = list(trees)
    taxa = trees[0].taxa
    r = len(trees)
    pendant = [sum(T.pendant[i] for T in trees) / r for i in range(taxa.n)]
    scale = max(max((T.norm() for T in trees), default=1.0), 1.0)

    def build(S, x):
        return Tree(taxa, {s: v for s, v in zip(S, x) if v > 0}, pendant)

    def f(S, x):
        return frechet_value_brute(build(S, x), trees, cfg)

    best_val, best_tree = math.inf, None
    for S in candidate_orthants:
        S = sorted(S)
        if len(S) > 3:
            raise OracleLimitError("grid search supports orthants of dimension <= 3")
        starts = []
        ticks = [scale * t / 4 for t in range(5)]
        grid = sorted(product(ticks, repeat=len(S)), key=lambda x: f(S, x))
        starts = grid[: max(cfg.restarts, 1)]
        for x in starts:
            x = list(x)
            val = f(S, x)
            step = scale / 8
            while step >= cfg.grid_resolution / 4:
                moved = False
                for i in range(len(S)):
                    for sgn in (1, -1):
                        y = list(x)
                        y[i] = max(0.0, y[i] + sgn * step)
                        v = f(S, y)
                        if v < val - 1e-15:
                            x, val, moved = y, v, True
                if not moved:
                    step /= 2
            if val < best_val:
                best_val, best_tree = val, build(S, x)
    if best_tree is None:
        best_tree = Tree(taxa, {}, pendant)
    return best_tree
