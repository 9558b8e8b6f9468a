"""Translated log maps and their directional limits.

The translated log map of ``T`` at ``base`` unfolds the geodesic from
``base`` to ``T`` into the coordinates around ``base``: shared splits keep
the target's weights, and each traded group of base splits is reflected to
negative values scaled so the unfolded point sits at the true distance.
"""
from __future__ import annotations

import math
from typing import Iterable, Mapping

from .core import AmbientVector, Split, Tree, compatible_masks
from .geodesic import Support, _nrm, geodesic_support

#: initial perturbation is this times (1 + ||base||)
INITIAL_STEP = 1e-3
MAX_HALVINGS = 60


class InvalidDirectionError(ValueError):
    pass


class TangentVector(AmbientVector):
    """Signed coordinates in the tangent cone at ``base``."""

    __slots__ = ("base", "support", "step")

    def __init__(self, coords, base: Tree, support: Support | None = None, step: float | None = None):
        super().__init__(coords)
        self.base = base
        self.support = support
        self.step = step


class Direction:
    """A tangent direction at ``base`` pointing into the orthant of E(base) plus ``extension``.

    Coordinates on the extension splits must be strictly positive; coordinates
    on the base's own splits may have any sign.
    """

    __slots__ = ("coords", "base", "extension")

    def __init__(self, coords: Mapping[Split, float], base: Tree):
        coords = {s: float(x) for s, x in coords.items() if x != 0.0}
        E = base.splits
        F = frozenset(s for s in coords if s not in E)
        for s in F:
            if coords[s] <= 0.0:
                raise InvalidDirectionError(f"extension split {s} needs a positive coordinate")
        allsplits = list(E | F)
        for i, a in enumerate(allsplits):
            for b in allsplits[i + 1:]:
                if not compatible_masks(a.mask, b.mask):
                    raise InvalidDirectionError(f"direction crosses the base: {a} vs {b}")
        if not coords:
            raise InvalidDirectionError("zero direction")
        self.coords = coords
        self.base = base
        self.extension = F

    @classmethod
    def axis(cls, s: Split, base: Tree) -> "Direction":
        return cls({s: 1.0}, base)

    def norm(self) -> float:
        return math.sqrt(sum(x * x for x in self.coords.values()))

    def unit(self) -> "Direction":
        c = self.norm()
        return Direction({s: x / c for s, x in self.coords.items()}, self.base)

    def perturb(self, lam: float) -> Tree:
        """``base + lam * w``; ``lam`` must be small enough to keep weights positive."""
        w = dict(self.base._w)
        for s, x in self.coords.items():
            w[s] = w.get(s, 0.0) + lam * x
        if any(x <= 0.0 for x in w.values()):
            raise ValueError("perturbation step too large")
        return self.base._replace(w)

    def __repr__(self) -> str:
        body = ", ".join(f"{s.label()}: {x:.6g}" for s, x in sorted(self.coords.items()))
        return f"Direction({{{body}}})"


def _unfold(T: Tree, sup: Support, base_w: Mapping[Split, float], fallback: Mapping[Split, float]):
    coords = {}
    wT = T._w
    for s in sup.common:
        x = wT.get(s)
        if x:
            coords[s] = x
    for A, B in sup.pairs:
        W = {a: base_w[a] for a in A if a in base_w}
        if not W:
            W = {a: fallback[a] for a in A if a in fallback}
        scale = _nrm(B, T) / math.sqrt(sum(x * x for x in W.values()))
        for a, x in W.items():
            coords[a] = -scale * x
    return coords


def _pair_fixed(A, B, base_w, ext, moves_base) -> bool:
    """True when P3 holds for the pair at every step once it holds at one."""
    if len(A) == 1 or len(B) == 1:
        return True
    if not moves_base and (all(a in base_w for a in A) or all(a in ext for a in A)):
        # the relative weights inside A do not depend on the step
        return True
    return all(not compatible_masks(a.mask, b.mask) for a in A for b in B)


def _fixed_below(sup: Support, T: Tree, w: Direction, lam: float) -> bool:
    """True when the support at ``lam`` is also the support at ``lam / 2`` and ``lam / 4``.

    This is exactly what the halving loop would confirm.  The split sets of
    the perturbed base do not depend on the step, so the common part and the
    traded sets are fixed.  P3 for a pair depends only on the relative
    weights inside it, which are step-free for pure pairs.  When ``w`` moves
    the extension splits alone, each squared ratio is linear in ``lam**2``,
    so a strict P2 order at both ends of the range holds inside it too.
    """
    bw = w.base._w
    moves_base = any(s in bw for s in w.coords)
    if not all(_pair_fixed(A, B, bw, w.extension, moves_base) for A, B in sup.pairs):
        return False
    if len(sup.pairs) <= 1:
        return True
    if moves_base:
        return False
    wt = T._w
    ends = (lam * lam, lam * lam / 16)
    terms = []
    for A, B in sup.pairs:
        b = sum(bw[a] ** 2 for a in A if a in bw)
        f = sum(w.coords[a] ** 2 for a in A if a in w.extension)
        beta = sum(wt[x] ** 2 for x in B)
        terms.append((b / beta, f / beta))
    for (b1, f1), (b2, f2) in zip(terms, terms[1:]):
        for t in ends:
            r1, r2 = math.sqrt(b1 + t * f1), math.sqrt(b2 + t * f2)
            # a strict order, clear of the tie-merging tolerance
            if r2 - r1 <= 1e-8 * max(1.0, r2):
                return False
    return True


def log_map(T: Tree, base: Tree) -> TangentVector:
    """Translated log map of ``T`` at ``base``."""
    sup = geodesic_support(base, T)
    return TangentVector(_unfold(T, sup, base._w, {}), base, sup)


def directional_limit(T: Tree, w: Direction) -> TangentVector:
    """Limit of the translated log map at ``base + lam * w`` as ``lam -> 0+``.

    The support of the geodesic from the perturbed base is found by halving
    ``lam`` until it is unchanged over two successive halvings.
    """
    base = w.base
    if not w.extension:
        return log_map(T, base)
    # nothing of T crosses the perturbed orthant: the geodesic stays in one
    # orthant for every small lam and the limit is T itself
    near = [s.mask for s in base._w] + [s.mask for s in w.extension]
    if all(compatible_masks(t.mask, m) for t in T._w for m in near):
        common = frozenset(base._w) | w.extension | frozenset(T._w)
        return TangentVector(dict(T._w), base, Support(common, ()), None)
    lam = INITIAL_STEP * (1.0 + base.norm())
    neg = [(-base._w[s] / x) for s, x in w.coords.items() if x < 0 and s in base._w]
    if neg:
        lam = min(lam, 0.5 * min(neg))
    prev, streak = None, 0
    for _ in range(MAX_HALVINGS):
        sup = geodesic_support(w.perturb(lam), T)
        if prev is None and _fixed_below(sup, T, w, lam):
            # further halvings cannot change this support
            return TangentVector(_unfold(T, sup, base._w, w.coords), base, sup, lam)
        if sup == prev:
            streak += 1
            if streak >= 2:
                break
        else:
            streak = 0
        prev = sup
        lam /= 2
    else:
        raise RuntimeError("geodesic support did not stabilise")
    return TangentVector(_unfold(T, sup, base._w, w.coords), base, sup, lam * 4)


def project_tangent(v: AmbientVector, S: Iterable[Split]) -> TangentVector:
    """Zero every coordinate of ``v`` outside ``S``."""
    S = set(S)
    base = getattr(v, "base", None)
    return TangentVector({s: x for s, x in v.coords.items() if s in S}, base)
