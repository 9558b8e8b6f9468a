import pytest

from bhv.core import TaxonSet, Tree, canonical_split
from bhv.newick import NewickError, parse_newick, parse_tree, write_newick
from bhv.sampling import make_taxa, random_tree

EXAMPLE = "((A:1,B:2):3,C:4,(D:5,E:6):7);"


def test_parse_example():
    T = parse_tree(EXAMPLE)
    taxa = T.taxa
    assert T.weights == {canonical_split("AB", taxa): 3.0, canonical_split("DE", taxa): 7.0}
    assert T.pendant == (1.0, 2.0, 4.0, 5.0, 6.0)


def test_parse_star():
    T = parse_tree("(A:1,B:1,C:1,D:1,E:1);")
    assert T.splits == frozenset()


def test_unbalanced_offset():
    with pytest.raises(NewickError) as exc:
        parse_newick("((A,B);")
    assert "unbalanced parentheses" in str(exc.value)
    assert exc.value.offset == 6


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("((A:1,A:2):3,C:4,D:1);", "duplicate leaf"),
        ("((A:1,B:-2):3,C:4,D:1);", "negative branch length"),
        ("((A:1,B:2):3,C:4,D:1)", "missing ';'"),
        ("((A:1,B:2),C:4,D:1));", "unbalanced parentheses"),
        ("((A:1):3,C:4,D:1);", "single child"),
        ("(A:1,B:2):x;", "expected branch length"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(NewickError) as exc:
        parse_newick(text)
    assert fragment in str(exc.value)


def test_mismatched_leaf_sets():
    with pytest.raises(NewickError, match="leaf set differs"):
        parse_newick("((A,B),C,D);\n((A,B),C,E);")


def test_error_position_line_column():
    with pytest.raises(NewickError) as exc:
        parse_newick("((A,B),C,D);\n((A,B),C,-D);")
    assert exc.value.line == 2


def test_write_examples():
    taxa = TaxonSet("ABCDE")
    star = Tree(taxa, {}, [1, 1, 1, 1, 1])
    assert write_newick(star) == "(A:1,B:1,C:1,D:1,E:1);"
    T = Tree(taxa, {canonical_split("AB", taxa): 2.5})
    assert write_newick(T) == "((A:0,B:0):2.5,C:0,D:0,E:0);"


def test_round_trip_example():
    T = parse_tree(EXAMPLE)
    U = parse_tree(write_newick(T), T.taxa)
    assert U == T


def test_rooted_input_is_unrooted():
    rooted = parse_tree("((A:1,B:2):3,(C:4,(D:5,E:6):7):2);")
    unrooted = parse_tree("((A:1,B:2):5,C:4,(D:5,E:6):7);")
    assert rooted == unrooted


def test_quoted_labels_comments_and_defaults():
    T = parse_tree("(('it''s':1,[note]B):2,'C D',E,F);")
    assert T.taxa.labels == ("it's", "B", "C D", "E", "F")
    assert T.pendant[1] == 1.0  # missing length
    again = parse_tree(write_newick(T), T.taxa)
    assert again == T


def test_multiple_trees_share_taxa():
    doc = parse_newick("((A,B),C,(D,E));\n((A,C),B,(D,E));")
    assert len(doc) == 2
    assert doc[0].taxa is doc[1].taxa
    assert doc.offsets == [0, 17]


def test_binary_parse_has_n_minus_3_splits(rng):
    for n in range(4, 12):
        T = random_tree(make_taxa(n), rng)
        assert len(parse_tree(write_newick(T), T.taxa).splits) == n - 3


def test_round_trip_random(rng):
    for _ in range(100):
        n = rng.randint(4, 10)
        T = random_tree(make_taxa(n), rng, collapse=rng.choice([0.0, 0.4]))
        U = parse_tree(write_newick(T), T.taxa)
        assert U.splits == T.splits
        assert all(abs(U.weight(s) - x) <= 1e-12 for s, x in T.items())
        assert max(abs(a - b) for a, b in zip(U.pendant, T.pendant)) <= 1e-12
