import sys
import random

import pytest

from bhv.sampling import make_taxa, random_tree


@pytest.fixture
def rng():
    return random.Random(20240611)


@pytest.fixture
def random_pair(rng):
    def make(n=6, collapse=0.0):
        taxa = make_taxa(n)
        return random_tree(taxa, rng, collapse=collapse), random_tree(taxa, rng, collapse=collapse)

    return make


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.RESULTS:
        terminalreporter.write_line(line)
