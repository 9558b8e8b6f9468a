"""Leaf labels, splits, trees and the coordinate vectors that live on them.

Splits are stored as integer bitmasks over the leaf indices of a
:class:`TaxonSet`.  The stored side is always the one that does *not*
contain leaf 0, so two complementary descriptions of the same bipartition
compare and hash equal.
"""
from __future__ import annotations

import math
from itertools import combinations
from typing import Iterable, Iterator, Mapping, Sequence

#: weights below this are treated as absent when building trees from numbers
WEIGHT_TOL = 1e-12


class TaxaMismatchError(ValueError):
    """Raised when objects defined over different leaf sets are combined."""


class InvalidSplitError(ValueError):
    pass


class InvalidTreeError(ValueError):
    pass


class TaxonSet:
    """An ordered set of distinct leaf labels.

    The order fixes leaf indices (and hence split bitmasks) for the lifetime
    of the object.
    """

    __slots__ = ("labels", "_index", "_hash")

    def __init__(self, labels: Iterable[str]):
        labels = tuple(str(x) for x in labels)
        if len(labels) < 2:
            raise ValueError("a taxon set needs at least two labels")
        index = {}
        for i, lab in enumerate(labels):
            if lab in index:
                raise ValueError(f"duplicate leaf label {lab!r}")
            index[lab] = i
        self.labels = labels
        self._index = index
        self._hash = hash(labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.labels)) - 1

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown leaf label {label!r}") from None

    def split(self, *labels: str) -> "Split":
        """Convenience constructor: ``taxa.split("A", "B")`` gives AB|rest."""
        return canonical_split([self.index(x) for x in labels], self)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return isinstance(other, TaxonSet) and self.labels == other.labels

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"TaxonSet({list(self.labels)!r})"


class Split:
    """A bipartition of the leaf set, identified by its side without leaf 0."""

    __slots__ = ("mask", "taxa", "_hash", "_key")

    def __init__(self, mask: int, taxa: TaxonSet):
        full = taxa.full_mask
        if mask & 1:
            mask = full & ~mask
        if mask == 0 or mask == full:
            raise InvalidSplitError("a split needs two nonempty sides")
        self.mask = mask
        self.taxa = taxa
        self._hash = hash((mask, taxa._hash))
        self._key = None

    @property
    def side(self) -> frozenset[int]:
        return frozenset(_bits(self.mask))

    @property
    def complement(self) -> frozenset[int]:
        return frozenset(_bits(self.taxa.full_mask & ~self.mask))

    @property
    def size(self) -> int:
        """Size of the smaller side."""
        k = bin(self.mask).count("1")
        return min(k, self.taxa.n - k)

    @property
    def interior(self) -> bool:
        return self.size >= 2

    def sort_key(self) -> tuple:
        if self._key is None:
            self._key = (tuple(_bits(self.mask)),)
        return self._key

    def __lt__(self, other: "Split") -> bool:
        return self.sort_key() < other.sort_key()

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, Split)
            and self.mask == other.mask
            and self.taxa == other.taxa
        )

    def __hash__(self) -> int:
        return self._hash

    def label(self) -> str:
        """Human-readable form, side containing the first leaf written first."""
        labels = self.taxa.labels
        a = [labels[i] for i in _bits(self.taxa.full_mask & ~self.mask)]
        b = [labels[i] for i in _bits(self.mask)]
        sep = "" if all(len(x) == 1 for x in labels) else ","
        return f"{sep.join(a)}|{sep.join(b)}"

    def __repr__(self) -> str:
        return f"Split({self.label()})"

    __str__ = label


def _bits(mask: int) -> Iterator[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def canonical_split(subset: Iterable, taxa: TaxonSet) -> Split:
    """Build the canonical :class:`Split` for a subset of leaves.

    ``subset`` may hold leaf indices or leaf labels.  A subset and its
    complement produce equal splits.
    """
    mask = 0
    for x in subset:
        i = taxa.index(x) if isinstance(x, str) else int(x)
        if not 0 <= i < taxa.n:
            raise InvalidSplitError(f"leaf index {i} out of range")
        mask |= 1 << i
    return Split(mask, taxa)


def compatible_masks(a: int, b: int) -> bool:
    # Both masks exclude leaf 0, so their complements always intersect.
    return (a & b) == 0 or (a & ~b) == 0 or (b & ~a) == 0


def are_compatible(s: Split, t: Split) -> bool:
    """True iff ``s`` and ``t`` can coexist in one tree."""
    if s.taxa is not t.taxa and s.taxa != t.taxa:
        raise TaxaMismatchError("splits are defined over different taxa")
    return compatible_masks(s.mask, t.mask)


def mutually_compatible(splits: Iterable[Split]) -> bool:
    splits = list(splits)
    return all(are_compatible(a, b) for a, b in combinations(splits, 2))


def crossing_set(E: Iterable[Split], universe: Iterable[Split]) -> frozenset[Split]:
    """Splits of ``universe`` incompatible with at least one split of ``E``."""
    E = list(E)
    return frozenset(
        s for s in universe if any(not are_compatible(s, e) for e in E)
    )


def compatible_set(E: Iterable[Split], universe: Iterable[Split]) -> frozenset[Split]:
    """Splits of ``universe`` compatible with every split of ``E``."""
    E = list(E)
    return frozenset(s for s in universe if all(are_compatible(s, e) for e in E))


class Tree:
    """A point of treespace.

    ``weights`` maps interior splits to positive edge lengths; ``pendant``
    holds one nonnegative length per leaf.  Instances are immutable.
    """

    __slots__ = ("taxa", "_w", "_pendant")

    def __init__(
        self,
        taxa: TaxonSet,
        weights: Mapping[Split, float] | None = None,
        pendant: Sequence[float] | Mapping | None = None,
        *,
        validate: bool = True,
    ):
        self.taxa = taxa
        w = {}
        for s, x in (weights or {}).items():
            x = float(x)
            if validate:
                if s.taxa != taxa:
                    raise TaxaMismatchError("split taxa differ from tree taxa")
                if not s.interior:
                    raise InvalidTreeError(f"{s} is not an interior split")
                if not math.isfinite(x) or x < -WEIGHT_TOL:
                    raise InvalidTreeError(f"bad weight {x} for {s}")
            if x >= WEIGHT_TOL:
                w[s] = x
        if validate:
            keys = list(w)
            for a, b in combinations(keys, 2):
                if not compatible_masks(a.mask, b.mask):
                    raise InvalidTreeError(f"incompatible splits {a} and {b}")
            if len(keys) > max(taxa.n - 3, 0):
                raise InvalidTreeError("more than n-3 interior splits")
        self._w = w
        self._pendant = _pendant_tuple(pendant, taxa, validate)

    @classmethod
    def from_labels(
        cls,
        taxa: TaxonSet,
        weights: Mapping[Iterable[str] | str, float] | None = None,
        pendant: Mapping[str, float] | Sequence[float] | None = None,
    ) -> "Tree":
        """Build a tree from label-keyed splits, e.g. ``{"AB": 3}`` or ``{("A", "B"): 3}``."""
        w = {}
        for key, x in (weights or {}).items():
            labels = [key] if key in taxa._index else list(key)
            w[canonical_split(labels, taxa)] = x
        if isinstance(pendant, Mapping):
            pendant = {taxa.index(k) if isinstance(k, str) else k: v for k, v in pendant.items()}
        return cls(taxa, w, pendant)

    @classmethod
    def star(cls, taxa: TaxonSet, pendant=None) -> "Tree":
        return cls(taxa, {}, pendant)

    def _replace(self, weights, pendant=None) -> "Tree":
        # caller guarantees weights are positive, interior and compatible
        t = Tree.__new__(Tree)
        t.taxa = self.taxa
        t._w = weights
        t._pendant = self._pendant if pendant is None else pendant
        return t

    @property
    def weights(self) -> Mapping[Split, float]:
        return dict(self._w)

    @property
    def pendant(self) -> tuple[float, ...]:
        return self._pendant

    @property
    def splits(self) -> frozenset[Split]:
        return frozenset(self._w)

    def weight(self, s: Split) -> float:
        return self._w.get(s, 0.0)

    def __contains__(self, s: Split) -> bool:
        return s in self._w

    def __len__(self) -> int:
        return len(self._w)

    def items(self):
        return self._w.items()

    def norm(self) -> float:
        """Distance to the star tree with the same pendant lengths."""
        return math.sqrt(sum(x * x for x in self._w.values()))

    def is_binary(self) -> bool:
        return len(self._w) == self.taxa.n - 3

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Tree)
            and self.taxa == other.taxa
            and self._w == other._w
            and self._pendant == other._pendant
        )

    def __hash__(self) -> int:
        return hash((self.taxa, frozenset(self._w.items()), self._pendant))

    def isclose(self, other: "Tree", tol: float = 1e-9, pendant: bool = True) -> bool:
        if self.taxa != other.taxa or self.splits != other.splits:
            return False
        if any(abs(x - other.weight(s)) > tol for s, x in self._w.items()):
            return False
        if pendant:
            return all(abs(a - b) <= tol for a, b in zip(self._pendant, other._pendant))
        return True

    def __repr__(self) -> str:
        body = ", ".join(f"{s.label()}: {x:.6g}" for s, x in sorted(self._w.items()))
        return f"Tree({{{body}}})"


def _pendant_tuple(pendant, taxa: TaxonSet, validate: bool) -> tuple[float, ...]:
    if pendant is None:
        return (0.0,) * taxa.n
    if isinstance(pendant, Mapping):
        out = [0.0] * taxa.n
        for k, v in pendant.items():
            out[taxa.index(k) if isinstance(k, str) else int(k)] = float(v)
    else:
        out = [float(v) for v in pendant]
        if len(out) != taxa.n:
            raise InvalidTreeError("need one pendant length per leaf")
    if validate:
        for v in out:
            if not math.isfinite(v) or v < -WEIGHT_TOL:
                raise InvalidTreeError(f"bad pendant length {v}")
    return tuple(max(v, 0.0) for v in out)


class AmbientVector:
    """Sparse vector indexed by interior splits (zero off its support)."""

    __slots__ = ("coords",)

    def __init__(self, coords: Mapping[Split, float] | None = None):
        self.coords = {s: float(x) for s, x in (coords or {}).items() if x != 0.0}

    def __getitem__(self, s: Split) -> float:
        return self.coords.get(s, 0.0)

    def __iter__(self):
        return iter(sorted(self.coords))

    def __len__(self) -> int:
        return len(self.coords)

    def items(self):
        return sorted(self.coords.items())

    def norm(self) -> float:
        return math.sqrt(sum(x * x for x in self.coords.values()))

    def dot(self, other: "AmbientVector") -> float:
        a, b = (self.coords, other.coords)
        if len(a) > len(b):
            a, b = b, a
        return sum(x * b.get(s, 0.0) for s, x in a.items())

    def restrict(self, S: Iterable[Split]) -> "AmbientVector":
        S = set(S)
        return AmbientVector({s: x for s, x in self.coords.items() if s in S})

    def __add__(self, other: "AmbientVector") -> "AmbientVector":
        out = dict(self.coords)
        for s, x in other.coords.items():
            out[s] = out.get(s, 0.0) + x
        return AmbientVector(out)

    def __sub__(self, other: "AmbientVector") -> "AmbientVector":
        out = dict(self.coords)
        for s, x in other.coords.items():
            out[s] = out.get(s, 0.0) - x
        return AmbientVector(out)

    def __mul__(self, c: float) -> "AmbientVector":
        return AmbientVector({s: c * x for s, x in self.coords.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, AmbientVector) and self.coords == other.coords

    def isclose(self, other: "AmbientVector", tol: float = 1e-9) -> bool:
        return (self - other).norm() <= tol

    def __repr__(self) -> str:
        body = ", ".join(f"{s.label()}: {x:.6g}" for s, x in self.items())
        return f"{type(self).__name__}({{{body}}})"


def embed(T: Tree) -> AmbientVector:
    """Coordinates of ``T``: its interior weights, zero elsewhere."""
    return AmbientVector(T._w)


def project(T: Tree, E: Iterable[Split]) -> AmbientVector:
    """Orthogonal projection of ``T`` onto the orthant spanned by ``E``."""
    E = list(E)
    if not mutually_compatible(E):
        raise InvalidTreeError("projection target is not a compatible split set")
    return AmbientVector({s: T._w[s] for s in E if s in T._w})


def norm(E: Iterable[Split], T: Tree) -> float:
    """Euclidean norm of the weights of ``E`` in ``T``."""
    w = T._w
    return math.sqrt(sum(w.get(e, 0.0) ** 2 for e in E))
