import math
import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhv.core import (
    AmbientVector,
    InvalidSplitError,
    InvalidTreeError,
    Split,
    TaxaMismatchError,
    TaxonSet,
    Tree,
    are_compatible,
    canonical_split,
    compatible_set,
    crossing_set,
    embed,
    mutually_compatible,
    norm,
    project,
)
from bhv.sampling import make_taxa, random_tree
from families import CHAIN, S1, S2, S3, S4, TAXA, tree

ABCDE = TaxonSet("ABCDE")


def test_canonical_split_interior():
    s = canonical_split({"A", "B"}, ABCDE)
    assert s.label() == "AB|CDE"
    assert s.interior


def test_complement_gives_same_split():
    assert canonical_split({"C", "D", "E"}, ABCDE) == canonical_split({"A", "B"}, ABCDE)
    assert hash(canonical_split([2, 3, 4], ABCDE)) == hash(canonical_split([0, 1], ABCDE))


def test_pendant_split():
    s = canonical_split({"A"}, ABCDE)
    assert s.label() == "A|BCDE"
    assert not s.interior


@pytest.mark.parametrize("subset", [set(), set("ABCDE")])
def test_trivial_subsets_rejected(subset):
    with pytest.raises(InvalidSplitError):
        canonical_split(subset, ABCDE)


def test_chain_compatibility():
    assert are_compatible(S1, S2)
    assert are_compatible(S2, S3)
    assert are_compatible(S3, S4)
    assert not are_compatible(S1, S3)
    assert not are_compatible(S1, S4)
    assert not are_compatible(S2, S4)
    assert are_compatible(S1, S1)


def test_compatibility_taxa_mismatch():
    other = TaxonSet("12346")
    with pytest.raises(TaxaMismatchError):
        are_compatible(S1, other.split("1", "2"))


def test_crossing_set_examples():
    U = set(CHAIN)
    assert crossing_set({S1}, U) == {S3, S4}
    assert crossing_set(set(), U) == frozenset()
    assert crossing_set({S1, S4}, U) == {S1, S2, S3, S4}


def test_crossing_and_compatible_partition_universe(rng):
    taxa = make_taxa(7)
    universe = set()
    for _ in range(20):
        universe |= random_tree(taxa, rng).splits
    for _ in range(30):
        E = set(rng.sample(sorted(universe), 3))
        X = crossing_set(E, universe)
        C = compatible_set(E, universe)
        assert not X & C
        assert (X | C) >= universe - E


@given(st.integers(1, 2 ** 7 - 2), st.integers(1, 2 ** 7 - 2))
@settings(max_examples=200, deadline=None)
def test_compatibility_symmetric(a, b):
    taxa = make_taxa(7)
    s, t = Split(a, taxa), Split(b, taxa)
    assert are_compatible(s, t) == are_compatible(t, s)
    assert are_compatible(s, s)


@given(st.sets(st.integers(0, 6), min_size=1, max_size=6))
def test_complement_identity_property(subset):
    taxa = make_taxa(7)
    rest = set(range(7)) - subset
    assert canonical_split(subset, taxa) == canonical_split(rest, taxa)


def test_compatibility_matches_side_intersections():
    # four-intersection definition, brute force over all splits of 6 leaves
    taxa = make_taxa(6)
    splits = {Split(m, taxa) for m in range(1, 2 ** 6 - 1)}
    for s, t in combinations(sorted(splits), 2):
        a, b = set(s.side), set(s.complement)
        c, d = set(t.side), set(t.complement)
        expected = not (a & c) or not (a & d) or not (b & c) or not (b & d)
        assert are_compatible(s, t) == expected


def test_random_binary_trees_have_n_minus_3_splits(rng):
    for n in range(4, 10):
        taxa = make_taxa(n)
        for _ in range(20):
            T = random_tree(taxa, rng)
            assert len(T.splits) == n - 3
            assert T.is_binary()
            assert mutually_compatible(T.splits)


def test_tree_rejects_incompatible_splits():
    with pytest.raises(InvalidTreeError):
        tree({S1: 1, S3: 1})


def test_tree_rejects_negative_weight_and_pendant_split():
    with pytest.raises(InvalidTreeError):
        tree({S1: -1})
    with pytest.raises(InvalidTreeError):
        tree({TAXA.split("1"): 1})


def test_tree_drops_tiny_weights():
    T = tree({S1: 1e-13, S2: 2})
    assert T.splits == {S2}


def test_from_labels():
    T = Tree.from_labels(ABCDE, {"AB": 3, ("D", "E"): 7}, {"A": 1, "E": 6})
    assert T.weight(canonical_split("AB", ABCDE)) == 3
    assert T.weight(canonical_split("ABC", ABCDE)) == 7
    assert T.pendant == (1.0, 0.0, 0.0, 0.0, 6.0)


def test_embed_examples():
    assert embed(tree({S1: 6})).coords == {S1: 6.0}
    assert embed(tree()).coords == {}
    assert embed(tree({S3: 4, S4: 1})).coords == {S3: 4.0, S4: 1.0}


def test_project_examples():
    w = 9.0
    assert project(tree({S1: w, S2: 1}), {S2}).coords == {S2: 1.0}
    assert project(tree({S1: 6}), {S3, S4}).coords == {}
    assert project(tree({S3: 4, S4: 1}), {S3}).coords == {S3: 4.0}
    with pytest.raises(InvalidTreeError):
        project(tree({S1: 6}), {S1, S3})


def test_project_is_restriction_of_embed(rng):
    taxa = make_taxa(8)
    for _ in range(20):
        T = random_tree(taxa, rng)
        E = rng.sample(sorted(T.splits), 2)
        assert project(T, E) == embed(T).restrict(E)


def test_norm_examples():
    assert norm({S3, S4}, tree({S3: 10, S4: 10})) == pytest.approx(10 * math.sqrt(2), abs=1e-12)
    assert norm({S1}, tree({S1: 6})) == 6
    assert norm({S3, S4}, tree({S3: 3, S4: 4})) == 5


def test_ambient_vector_algebra():
    u = AmbientVector({S1: 1.0, S2: 2.0})
    v = AmbientVector({S2: -2.0, S3: 3.0})
    assert (u + v).coords == {S1: 1.0, S3: 3.0}
    assert (u - u).coords == {}
    assert (2 * u)[S2] == 4.0
    assert u.dot(v) == -4.0
    assert u.norm() == pytest.approx(math.sqrt(5))


def test_tree_equality_and_hash():
    a = tree({S1: 1, S2: 2})
    b = tree({S2: 2, S1: 1})
    assert a == b and hash(a) == hash(b)
    assert a.isclose(tree({S1: 1 + 1e-12, S2: 2}))
