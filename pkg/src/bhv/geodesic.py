"""Geodesics between two trees.

The geodesic is described by its support: the splits the two trees share
(or that one tree has and the other can accept), plus an ordered sequence
of pairs ``(A_i, B_i)`` where the splits ``A_i`` of the source are traded
for the splits ``B_i`` of the target.  A support is the geodesic's exactly
when properties P0-P3 hold; :func:`check_properties` tests them directly
and :func:`geodesic` builds the support by refining a single cone-path pair
until no pair admits an improving partition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from operator import attrgetter
from typing import NamedTuple, Sequence

from .core import (
    Split,
    TaxaMismatchError,
    Tree,
    compatible_masks,
)

#: relative tolerance used for ratio comparisons in P2/P3
RATIO_TOL = 1e-10
#: pairs with more splits than this use max-flow instead of enumeration
EXHAUSTIVE_LIMIT = 12


@dataclass(frozen=True)
class Support:
    """``common`` is A_0 = B_0; ``pairs`` lists (A_i, B_i) for i = 1..k."""

    common: frozenset
    pairs: tuple[tuple[frozenset, frozenset], ...]

    @property
    def k(self) -> int:
        return len(self.pairs)

    def key(self) -> tuple:
        return (self.common, self.pairs)


class PropertyReport(NamedTuple):
    p0: bool
    p1: bool
    p2: bool
    p3: bool

    @property
    def ok(self) -> bool:
        return self.p0 and self.p1 and self.p2 and self.p3


@dataclass(frozen=True)
class GeodesicPath:
    source: Tree
    target: Tree
    support: Support
    length: float

    def ratios(self) -> list[float]:
        return [_ratio(A, B, self.source, self.target) for A, B in self.support.pairs]

    def breakpoints(self) -> list[float]:
        """Values of lambda at which each pair's A-splits vanish."""
        out = []
        for A, B in self.support.pairs:
            a, b = _nrm(A, self.source), _nrm(B, self.target)
            out.append(a / (a + b))
        return out


def _nrm(E, T: Tree) -> float:
    w = T._w
    return math.sqrt(sum(w.get(e, 0.0) ** 2 for e in E))


def _ratio(A, B, T1, T2) -> float:
    return _nrm(A, T1) / _nrm(B, T2)


def _check_taxa(T1: Tree, T2: Tree) -> None:
    if T1.taxa is not T2.taxa and T1.taxa != T2.taxa:
        raise TaxaMismatchError("trees are defined over different taxa")


def common_part(T1: Tree, T2: Tree) -> tuple[frozenset, dict, dict]:
    """Splits shared by the two trees or held by one and compatible with the other.

    Returns the split set together with the weights each tree gives to it
    (0 for a split the tree lacks).
    """
    _check_taxa(T1, T2)
    common = _common(T1, T2)
    return (
        common,
        {s: T1.weight(s) for s in common},
        {s: T2.weight(s) for s in common},
    )


def _common(T1: Tree, T2: Tree) -> frozenset:
    w1, w2 = T1._w, T2._w
    m1 = [s.mask for s in w1]
    m2 = [t.mask for t in w2]
    out = set()
    # inline compatibility test: disjoint or nested sides
    for s in w1:
        m = s.mask
        if s in w2 or all(not (m & t) or not (m & ~t) or not (t & ~m) for t in m2):
            out.add(s)
    for t in w2:
        if t not in out:
            m = t.mask
            if all(not (m & u) or not (m & ~u) or not (u & ~m) for u in m1):
                out.add(t)
    return frozenset(out)


def support_length(sup: Support, T1: Tree, T2: Tree) -> float:
    total = 0.0
    for A, B in sup.pairs:
        total += (_nrm(A, T1) + _nrm(B, T2)) ** 2
    w1, w2 = T1._w, T2._w
    for e in sup.common:
        total += (w1.get(e, 0.0) - w2.get(e, 0.0)) ** 2
    for a, b in zip(T1._pendant, T2._pendant):
        total += (a - b) ** 2
    return math.sqrt(total)


# -- checking -----------------------------------------------------------------


def _p3_violation(A, B, T1, T2, tol=RATIO_TOL):
    """Exhaustively search a pair for a partition breaking P3.

    Returns ``(C1, C2, D1, D2)`` for the most violating partition, or None.
    Only C2 needs enumerating: for fixed C2 the best D1 is every split of
    B compatible with all of C2 (minus the lightest one if that is all of B).
    """
    A = sorted(A)
    B = sorted(B)
    if len(A) < 2 or len(B) < 2:
        return None
    w1, w2 = T1._w, T2._w
    a2 = {a: w1[a] ** 2 for a in A}
    b2 = {b: w2[b] ** 2 for b in B}
    nA, nB = sum(a2.values()), sum(b2.values())
    best, best_val = None, tol
    for r in range(1, len(A)):
        for C2 in combinations(A, r):
            D1 = [b for b in B if all(compatible_masks(b.mask, c.mask) for c in C2)]
            if not D1:
                continue
            if len(D1) == len(B):
                D1.remove(min(D1, key=lambda b: (b2[b], b.sort_key())))
            x = 1.0 - sum(a2[c] for c in C2) / nA  # ||C1||^2 / ||A||^2
            y = sum(b2[d] for d in D1) / nB  # ||D1||^2 / ||B||^2
            # ||C1||/||D1|| > ||C2||/||D2||  <=>  x > y
            if y - x > best_val:
                best_val = y - x
                C2s, D1s = frozenset(C2), frozenset(D1)
                best = (frozenset(A) - C2s, C2s, D1s, frozenset(B) - D1s)
    return best


def check_properties(sup: Support, T1: Tree, T2: Tree) -> PropertyReport:
    """Evaluate P0-P3 for a candidate support of the geodesic T1 -> T2."""
    _check_taxa(T1, T2)
    common = _common(T1, T2)
    p0 = sup.common == common
    # the pairs must partition the remaining splits with nonempty sides
    rest1 = frozenset(T1._w) - common
    rest2 = frozenset(T2._w) - common
    seen_a = [a for A, _ in sup.pairs for a in A]
    seen_b = [b for _, B in sup.pairs for b in B]
    if (
        len(seen_a) != len(set(seen_a))
        or set(seen_a) != rest1
        or len(seen_b) != len(set(seen_b))
        or set(seen_b) != rest2
        or any(not A or not B for A, B in sup.pairs)
    ):
        p0 = False
    p1 = all(
        compatible_masks(a.mask, b.mask)
        for i, (Ai, _) in enumerate(sup.pairs)
        for _, Bj in sup.pairs[:i]
        for a in Ai
        for b in Bj
    )
    p2 = True
    ratios = [
        _ratio(A, B, T1, T2) if A and B else math.nan for A, B in sup.pairs
    ]
    for r1, r2 in zip(ratios, ratios[1:]):
        if not r1 <= r2 + RATIO_TOL * max(1.0, abs(r2)):
            p2 = False
    p3 = True
    for A, B in sup.pairs:
        if not (A <= frozenset(T1._w) and B <= frozenset(T2._w)):
            p3 = False
            break
        if _p3_violation(A, B, T1, T2) is not None:
            p3 = False
            break
    return PropertyReport(p0, p1, p2, p3)


# -- minimum weight vertex cover --------------------------------------------------


def min_vertex_cover(A, B, wa: dict, wb: dict, method: str = "auto"):
    """Minimum weight vertex cover of the bipartite incompatibility graph.

    Returns ``(weight, C1, D2)`` where the cover is ``C1`` (from ``A``) plus
    ``D2`` (from ``B``).  ``method`` is ``"enumerate"``, ``"flow"`` or
    ``"auto"``.
    """
    A = sorted(A)
    B = sorted(B)
    if method == "auto":
        method = "enumerate" if len(A) <= EXHAUSTIVE_LIMIT else "flow"
    if method == "enumerate":
        return _cover_enumerate(A, B, wa, wb)
    if method == "flow":
        return _cover_flow(A, B, wa, wb)
    raise ValueError(f"unknown cover method {method!r}")


def _incompatibility(A, B):
    """Bitmask of the splits of ``B`` crossing each split of ``A``."""
    bm = [b.mask for b in B]
    nbr = []
    for a in A:
        am = a.mask
        row = 0
        for j, t in enumerate(bm):
            if am & t and am & ~t and t & ~am:
                row |= 1 << j
        nbr.append(row)
    return nbr


def _cover_dp(nbr, wA, wB):
    """Minimum cover as ``(weight, C2, D2)`` bitmasks; ``C2`` is the uncovered part of A."""
    m = len(wA)
    total_a = sum(wA)
    # subsets C2 of A as bitmasks; the uncovered part C2 forces its
    # neighbourhood D2 into the cover
    size = 1 << m
    cov = [0] * size
    kept = [0.0] * size
    best_w, best_c2, best_d2 = total_a, 0, 0
    bcache = {0: 0.0}
    for c2 in range(1, size):
        low = c2 & -c2
        i = low.bit_length() - 1
        rest = c2 ^ low
        d2 = cov[rest] | nbr[i]
        cov[c2] = d2
        kept[c2] = kept[rest] + wA[i]
        wd = bcache.get(d2)
        if wd is None:
            wd = sum(wB[j] for j in range(len(wB)) if (d2 >> j) & 1)
            bcache[d2] = wd
        w = total_a - kept[c2] + wd
        if w < best_w - 1e-15:
            best_w, best_c2, best_d2 = w, c2, d2
    return best_w, best_c2, best_d2


def _cover_enumerate(A, B, wa, wb):
    w, c2, d2 = _cover_dp(_incompatibility(A, B), [wa[a] for a in A], [wb[b] for b in B])
    C1 = frozenset(a for i, a in enumerate(A) if not (c2 >> i) & 1)
    D2 = frozenset(b for j, b in enumerate(B) if (d2 >> j) & 1)
    return w, C1, D2


def _cover_flow(A, B, wa, wb):
    import networkx as nx
    from networkx.algorithms.flow import edmonds_karp

    G = nx.DiGraph()
    for a in A:
        G.add_edge("s", ("a", a), capacity=wa[a])
        for b in B:
            if not compatible_masks(a.mask, b.mask):
                G.add_edge(("a", a), ("b", b))  # infinite capacity
    for b in B:
        G.add_edge(("b", b), "t", capacity=wb[b])
    R = edmonds_karp(G, "s", "t")
    # the source side of the cut, read off the residual graph with a
    # tolerance so rounding in the flow cannot close a saturated edge twice
    eps = 1e-14
    reach, stack = {"s"}, ["s"]
    while stack:
        u = stack.pop()
        for v, e in R[u].items():
            if v not in reach and e["capacity"] - e["flow"] > eps:
                reach.add(v)
                stack.append(v)
    C1 = frozenset(a for a in A if ("a", a) not in reach)
    D2 = frozenset(b for b in B if ("b", b) in reach)
    weight = sum(wa[a] for a in C1) + sum(wb[b] for b in D2)
    return weight, C1, D2


# -- construction -----------------------------------------------------------------


_by_mask = attrgetter("mask")


def _refine(A, B, T1, T2, method="auto"):
    """Split one pair if some partition beats it; return None otherwise."""
    if len(A) < 2 or len(B) < 2:
        return None
    w1, w2 = T1._w, T2._w
    A = sorted(A, key=_by_mask)
    B = sorted(B, key=_by_mask)
    nA = sum(w1[a] ** 2 for a in A)
    nB = sum(w2[b] ** 2 for b in B)
    if method == "flow" or (method == "auto" and len(A) > EXHAUSTIVE_LIMIT):
        wa = {a: w1[a] ** 2 / nA for a in A}
        wb = {b: w2[b] ** 2 / nB for b in B}
        weight, C1, D2 = min_vertex_cover(A, B, wa, wb, "flow")
    elif method in ("auto", "enumerate"):
        nbr = _incompatibility(A, B)
        # complete incompatibility: the only covers are A and B, both of weight 1
        if all(row == (1 << len(B)) - 1 for row in nbr):
            return None
        weight, c2, d2 = _cover_dp(nbr, [w1[a] ** 2 / nA for a in A], [w2[b] ** 2 / nB for b in B])
        C1 = frozenset(a for i, a in enumerate(A) if not (c2 >> i) & 1)
        D2 = frozenset(b for j, b in enumerate(B) if (d2 >> j) & 1)
    else:
        raise ValueError(f"unknown cover method {method!r}")
    if weight >= 1.0 - RATIO_TOL:
        return None
    C2 = frozenset(A) - C1
    D1 = frozenset(B) - D2
    if not (C1 and C2 and D1 and D2):
        return None
    return (C1, D1), (C2, D2)


def _merge_ties(pairs, T1, T2):
    out = list(pairs)
    i = 0
    while i + 1 < len(out):
        (A1, B1), (A2, B2) = out[i], out[i + 1]
        r1, r2 = _ratio(A1, B1, T1, T2), _ratio(A2, B2, T1, T2)
        if abs(r1 - r2) <= RATIO_TOL * max(1.0, r2):
            A, B = A1 | A2, B1 | B2
            if _p3_violation(A, B, T1, T2) is None:
                out[i : i + 2] = [(A, B)]
                continue
        i += 1
    return out


def geodesic_support(T1: Tree, T2: Tree, method: str = "auto") -> Support:
    _check_taxa(T1, T2)
    common = _common(T1, T2)
    A = frozenset(s for s in T1._w if s not in common)
    B = frozenset(s for s in T2._w if s not in common)
    if not A or not B:
        return Support(common, ())
    pairs = [(A, B)]
    i = 0
    while i < len(pairs):
        split = _refine(*pairs[i], T1, T2, method)
        if split is None:
            i += 1
        else:
            pairs[i : i + 1] = list(split)
    if len(pairs) == 1:
        return Support(common, tuple(pairs))
    ratios = [_ratio(A, B, T1, T2) for A, B in pairs]
    if any(r1 > r2 for r1, r2 in zip(ratios, ratios[1:])):
        # keep P1 order intact; a stable sort by ratio only moves equal blocks
        order = sorted(range(len(pairs)), key=lambda j: ratios[j])
        candidate = [pairs[j] for j in order]
        if check_properties(Support(common, tuple(candidate)), T1, T2).p1:
            pairs = candidate
    pairs = _merge_ties(pairs, T1, T2)
    return Support(common, tuple(pairs))


def geodesic(T1: Tree, T2: Tree, method: str = "auto") -> GeodesicPath:
    """The unique geodesic from ``T1`` to ``T2``."""
    sup = geodesic_support(T1, T2, method)
    return GeodesicPath(T1, T2, sup, support_length(sup, T1, T2))


def distance(T1: Tree, T2: Tree) -> float:
    return geodesic(T1, T2).length


def point_along(path: GeodesicPath, lam: float) -> Tree:
    """The tree a fraction ``lam`` of the way along ``path``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    T1, T2 = path.source, path.target
    if lam == 0.0:
        return T1
    if lam == 1.0:
        return T2
    w1, w2 = T1._w, T2._w
    out = {}
    for e in path.support.common:
        x = (1.0 - lam) * w1.get(e, 0.0) + lam * w2.get(e, 0.0)
        if x >= 1e-12:
            out[e] = x
    for A, B in path.support.pairs:
        a, b = _nrm(A, T1), _nrm(B, T2)
        fa = ((1.0 - lam) * a - lam * b) / a
        if fa > 0.0:
            for e in A:
                x = fa * w1[e]
                if x >= 1e-12:
                    out[e] = x
        else:
            fb = (lam * b - (1.0 - lam) * a) / b
            for e in B:
                x = fb * w2[e]
                if x >= 1e-12:
                    out[e] = x
    pendant = tuple(
        (1.0 - lam) * p + lam * q for p, q in zip(T1._pendant, T2._pendant)
    )
    return T1._replace(out, pendant)


def pairwise_distances(trees: Sequence[Tree]) -> list[list[float]]:
    r = len(trees)
    D = [[0.0] * r for _ in range(r)]
    for i in range(r):
        for j in range(i + 1, r):
            D[i][j] = D[j][i] = distance(trees[i], trees[j])
    return D
