"""Split-membership conditions for the Fréchet mean and orthant pruning.

Two quantities drive everything here.  The split sum of ``s`` is its total
weight across the inputs minus the total weight of every input split crossing
it; when it is positive ``s`` is in the mean.  The square-sum difference of a
compatible set ``S`` compares the squared totals of ``S`` with the summed
squared weights of the input splits crossing ``S``; the mean's split set always
has a positive value, so orthants where it is not positive can be skipped.

Pendant splits never enter these sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, islice
from typing import Iterable, Sequence

import networkx as nx

from .core import Split, Tree, compatible_masks, mutually_compatible

DEFAULT_CAP = 10 ** 6


class IncompatibleSetError(ValueError):
    pass


def _totals(trees: Sequence[Tree]):
    """Per-split sum of weights and sum of squared weights over the inputs."""
    tot, sq = {}, {}
    for T in trees:
        for s, x in T._w.items():
            tot[s] = tot.get(s, 0.0) + x
            sq[s] = sq.get(s, 0.0) + x * x
    return tot, sq


def input_splits(trees: Iterable[Tree]) -> frozenset[Split]:
    """E(trees): every interior split with positive weight in some input."""
    out = set()
    for T in trees:
        out.update(T._w)
    return frozenset(out)


def _crosses_any(x: Split, S) -> bool:
    return any(not compatible_masks(x.mask, s.mask) for s in S)


def split_sum(s: Split, trees: Sequence[Tree]) -> float:
    """Total weight of ``s`` minus the total weight of input splits crossing it."""
    if not s.interior:
        raise ValueError("split sums are defined for interior splits only")
    tot, _ = _totals(trees)
    return _split_sum(s, tot)


def _split_sum(s, tot):
    cross = sum(v for x, v in tot.items() if not compatible_masks(x.mask, s.mask))
    return tot.get(s, 0.0) - cross


def must_include(trees: Sequence[Tree]) -> frozenset[Split]:
    """Splits that provably belong to the mean.

    These are the splits with positive split sum together with every input
    split compatible with all inputs.
    """
    if not trees:
        raise ValueError("empty input")
    tot, _ = _totals(trees)
    E = list(tot)
    out = set()
    for s in E:
        if _split_sum(s, tot) > 0.0 or all(compatible_masks(s.mask, x.mask) for x in E):
            out.add(s)
    return frozenset(out)


def _ssd_terms(S, tot, sq, crossing_of=None):
    pos = sum(tot.get(s, 0.0) ** 2 for s in S)
    C = S if crossing_of is None else crossing_of
    neg = sum(v for x, v in sq.items() if _crosses_any(x, C))
    return pos, neg


def square_sum_difference(S: Iterable[Split], trees: Sequence[Tree]) -> float:
    """Sum of squared totals over ``S`` minus summed squares of splits crossing ``S``."""
    S = list(S)
    if not mutually_compatible(S):
        raise IncompatibleSetError("split set is not mutually compatible")
    tot, sq = _totals(trees)
    pos, neg = _ssd_terms(S, tot, sq)
    return pos - neg


def closure(S: Iterable[Split], E: Iterable[Split]) -> frozenset[Split]:
    """``S`` together with every split of ``E`` compatible with all of ``S``."""
    S = frozenset(S)
    return S | frozenset(x for x in E if not _crosses_any(x, S))


def closure_terms(S: Iterable[Split], trees: Sequence[Tree]) -> tuple[float, float]:
    """Positive and crossing terms of the closure test for ``S``.

    The positive term sums over the closure of ``S`` in E(trees); the crossing
    term sums over the splits crossing ``S`` itself.  Any compatible ``U``
    with ``S`` inside ``U`` inside the closure has a positive term no larger and
    a crossing term no smaller, so a non-positive difference rules out every
    mean containing all of ``S``.
    """
    S = frozenset(S)
    tot, sq = _totals(trees)
    Sp = closure(S, tot)
    pos = sum(tot[s] ** 2 for s in Sp)
    neg = sum(v for x, v in sq.items() if _crosses_any(x, S))
    return pos, neg


def closure_ssd(S: Iterable[Split], trees: Sequence[Tree]) -> float:
    pos, neg = closure_terms(S, trees)
    return pos - neg


def cauchy_schwarz_margins(S: Iterable[Split], trees: Sequence[Tree]) -> tuple[float, float]:
    """Left minus right side of the two Cauchy-Schwarz relaxations of the ssd test.

    Both are positive whenever ``S`` is the split set of the mean.
    """
    S = list(S)
    r = len(trees)
    tot, sq = _totals(trees)
    crossing = [x for x in tot if _crosses_any(x, S)]
    first = r * sum(sq.get(s, 0.0) for s in S) - sum(sq[x] for x in crossing)
    second = r * sum(tot.get(s, 0.0) ** 2 for s in S) - sum(tot[x] ** 2 for x in crossing)
    return first, second


@dataclass
class ConditionsReport:
    sigma: dict[Split, float]
    must_include: frozenset[Split]
    ssd_by_candidate: dict[frozenset, float] = field(default_factory=dict)
    excluded_closures: list[frozenset] = field(default_factory=list)
    surviving_orthants: list[frozenset] = field(default_factory=list)
    candidate_orthants: list[frozenset] = field(default_factory=list)
    cauchy_schwarz: dict[frozenset, tuple[float, float]] = field(default_factory=dict)
    maximal_sets: list[frozenset] = field(default_factory=list)
    truncated: bool = False

    def survives(self, S: Iterable[Split]) -> bool:
        """True when ``S`` lies in the closure of some surviving orthant."""
        S = frozenset(S)
        return any(S <= U for U in self.surviving_orthants)

    def is_candidate(self, S: Iterable[Split]) -> bool:
        """True when ``S`` contains every forced split and lies in a candidate orthant."""
        S = frozenset(S)
        return self.must_include <= S and any(S <= U for U in self.candidate_orthants)

    def exclusion_reason(self, S: Iterable[Split]) -> str | None:
        S = frozenset(S)
        if not self.must_include <= S:
            return "misses a forced split"
        if S and S in self.ssd_by_candidate and self.ssd_by_candidate[S] <= 0.0:
            return "square-sum difference not positive"
        for C in self.excluded_closures:
            if C <= S:
                return "closure test fails for a subset"
        return None


def maximal_compatible_sets(E: Iterable[Split], required: Iterable[Split] = (), cap: int = DEFAULT_CAP):
    """Maximal mutually compatible subsets of ``E`` containing ``required``.

    Returns the list and a flag telling whether ``cap`` cut the enumeration short.
    """
    required = frozenset(required)
    free = [s for s in E if s not in required and not _crosses_any(s, required)]
    if not free:
        return [required], False
    g = nx.Graph()
    g.add_nodes_from(range(len(free)))
    for i, j in combinations(range(len(free)), 2):
        if compatible_masks(free[i].mask, free[j].mask):
            g.add_edge(i, j)
    cliques = list(islice(nx.find_cliques(g), cap + 1))
    truncated = len(cliques) > cap
    out = [required | frozenset(free[i] for i in c) for c in cliques[:cap]]
    return out, truncated


def prune_orthants(trees: Sequence[Tree], cap: int = DEFAULT_CAP) -> ConditionsReport:
    """Evaluate both conditions and list the orthants that may hold the mean.

    Faces of the maximal compatible subsets of E(trees) are tested.  A
    nonempty face is dropped when its square-sum difference is not positive or
    when a face inside it fails the closure test.  ``surviving_orthants`` are
    the maximal remaining faces; ``candidate_orthants`` are the maximal
    remaining faces that also hold every forced split.
    """
    if not trees:
        raise ValueError("empty input")
    tot, sq = _totals(trees)
    E = sorted(tot)
    sigma = {s: _split_sum(s, tot) for s in E}
    forced = must_include(trees)
    report = ConditionsReport(sigma=sigma, must_include=forced)
    maximal, truncated = maximal_compatible_sets(E, (), cap)
    report.maximal_sets = sorted(maximal, key=_set_key)
    report.truncated = truncated

    faces = set()
    for M in maximal:
        members = sorted(M)
        for k in range(len(members) + 1):
            for sub in combinations(members, k):
                faces.add(frozenset(sub))
        if len(faces) > cap:
            report.truncated = True
            break

    closures_bad = set()
    for S in faces:
        if S:
            pos, neg = _ssd_terms(S, tot, sq)
            report.ssd_by_candidate[S] = pos - neg
            cpos = sum(tot[s] ** 2 for s in closure(S, E))
            if cpos - neg <= 0.0:
                closures_bad.add(S)
    # only minimal failing sets are worth reporting
    report.excluded_closures = sorted(
        (C for C in closures_bad if not any(D < C for D in closures_bad)), key=_set_key
    )

    alive = {
        S for S in faces
        if not (S and report.ssd_by_candidate[S] <= 0.0)
        and not any(C <= S for C in report.excluded_closures)
    }
    report.surviving_orthants = _maximal(alive)
    report.candidate_orthants = _maximal({S for S in alive if forced <= S})
    for S in report.surviving_orthants + report.candidate_orthants:
        if S and S not in report.cauchy_schwarz:
            report.cauchy_schwarz[S] = cauchy_schwarz_margins(S, trees)
    return report


def _maximal(sets):
    return sorted((S for S in sets if not any(S < U for U in sets)), key=_set_key)


def _set_key(S):
    return (len(S), sorted(s.sort_key() for s in S))
