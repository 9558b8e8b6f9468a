"""Acceptance criteria, one check per criterion.

Run under pytest, or directly with ``python tests/test_acceptance.py`` to get
one PASS/FAIL line per criterion.
"""
import math
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import pytest

from bhv.conditions import cauchy_schwarz_margins, must_include, split_sum, square_sum_difference
from bhv.core import embed
from bhv.frechet import MeanOptions, condition_ii_residual, direction_value, mean, verify_mean
from bhv.geodesic import check_properties, distance, geodesic, point_along
from bhv.newick import parse_tree, write_newick
from bhv.oracle import brute_force_distance
from bhv.sampling import make_taxa, random_tree
from bhv.tangent import Direction, log_map, project_tangent
from families import (
    S1, S2, S3, S4, chain_family, cone_pair, sticky_family, sticky_m, sticky_x, tree,
)

TIME_LIMIT = 10.0
RESULTS = []


def criterion(number, title):
    def wrap(check):
        def run():
            start = time.perf_counter()
            try:
                ok, detail = check()
            except Exception as exc:  # a crash is a failure, reported like one
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            elapsed = time.perf_counter() - start
            if elapsed > TIME_LIMIT:
                ok, detail = False, f"{detail}; over the {TIME_LIMIT:g} s limit"
            line = f"{'PASS' if ok else 'FAIL'}  [{number}] {title}: {detail} ({elapsed:.2f} s)"
            RESULTS.append(line)
            print(line)
            return ok, line

        run.number = number
        return run

    return wrap


@criterion(1, "cone geodesic")
def cone_geodesic():
    a, b = cone_pair()
    p = geodesic(a, b)
    mid = point_along(p, 0.5)
    ok = abs(p.length - 11.0) <= 1e-12 and mid.splits == {S1} and abs(mid.weight(S1) - 0.5) <= 1e-12
    return ok, f"d = {p.length!r}, midpoint s1 = {mid.weight(S1)!r}"


@criterion("2a", "stickiness family, w = 9")
def sticky_nine():
    mu, cert, _ = mean(sticky_family(9.0))
    x3, x4 = mu.weight(S3), mu.weight(S4)
    ok = (
        mu.splits == {S3, S4}
        and abs(x3 - 0.0902) <= 1e-3
        and abs(x4 - 0.0902) <= 1e-3
        and cert.verdict == "pass"
    )
    return ok, f"x = ({x3:.7f}, {x4:.7f}), closed form {sticky_x(9.0):.7f}, verdict {cert.verdict}"


@criterion("2b", "stickiness family, w = 9.7")
def sticky_origin():
    trees = sticky_family(9.7)
    mu, cert, _ = mean(trees)
    expected = {
        S1: 13.7 - 10 * math.sqrt(2),
        S2: -7.0,
        S3: -3.7,
        S4: 10 - (math.hypot(9.7, 1) + math.hypot(3, 1) + math.hypot(1, 1)),
    }
    got = {s: direction_value(Direction.axis(s, mu), trees) for s in expected} if not mu.splits else {}
    ok = (
        not mu.splits
        and all(abs(got[s] - v) <= 1e-6 and got[s] <= 0 for s, v in expected.items())
        and abs(got[S1] + 0.442) <= 1e-3
        and abs(got[S4] + 4.32) <= 1e-2
        and cert.verdict == "pass"
    )
    vals = ", ".join(f"{got[s]:.4f}" for s in (S1, S2, S3, S4)) if got else "n/a"
    return ok, f"mean has {len(mu.splits)} splits, axis sums ({vals}), verdict {cert.verdict}"


@criterion("2c", "stickiness family, w = 12")
def sticky_twelve():
    mu, cert, _ = mean(sticky_family(12.0))
    m = sticky_m(12.0)
    assert abs(m - (math.sqrt(265) - 10 * math.sqrt(2)) / 4) <= 1e-15
    u = math.hypot(16 / 3, 1)
    target = (m * (16 / 3) / u, m / u)
    got = (mu.weight(S1), mu.weight(S2))
    ok = (
        mu.splits == {S1, S2}
        and max(abs(g - t) for g, t in zip(got, target)) <= 1e-3
        and abs(math.hypot(*got) - m) <= 1e-3
        and cert.verdict != "fail"
    )
    return ok, f"mean ({got[0]:.6f}, {got[1]:.6f}), expected ({target[0]:.6f}, {target[1]:.6f}), m = {m:.6f}"


@criterion(3, "split sums, w = 10")
def split_sums():
    trees = sticky_family(10.0)
    sig = [split_sum(s, trees) for s in (S1, S2, S3, S4)]
    forced = must_include(trees)
    mu, _, _ = mean(trees)
    ok = sig == [-6.0, -7.0, -4.0, -7.0] and not forced and bool(mu.splits)
    return ok, f"sigma = {sig}, must_include = {sorted(forced)}, mean splits = {sorted(mu.splits)}"


@criterion(4, "ssd on the chain family")
def chain_ssd():
    trees = chain_family()
    a = square_sum_difference({S1, S2}, trees)
    b = square_sum_difference({S2, S3}, trees)
    mu, _, rep = mean(trees)
    near = abs(mu.weight(S2) - 2 / 3) <= 1e-2 and abs(mu.weight(S3) - 1 / 3) <= 1e-2
    ok = (
        a == 1 and b == 15
        and mu.splits == {S2, S3} and near
        and rep.survives(mu.splits)
        and frozenset({S1, S2}) in rep.surviving_orthants
    )
    return ok, (
        f"ssd = {a:g}, {b:g}; mean ({mu.weight(S2):.6f}, {mu.weight(S3):.6f}); "
        f"survivors {[sorted(s.label() for s in U) for U in rep.surviving_orthants]}"
    )


@criterion(5, "split-sum sufficiency, 500 random instances")
def sigma_sufficiency():
    rng = random.Random(5)
    bad = []
    for k in range(500):
        taxa = make_taxa(rng.randint(4, 7))
        trees = [random_tree(taxa, rng, low=0.0, high=10.0, pendant=False) for _ in range(rng.randint(1, 8))]
        mu, _, _ = mean(trees, MeanOptions(seed=k, conditions=False))
        E = {s for T in trees for s in T.splits}
        if any(split_sum(s, trees) > 0 and s not in mu.splits for s in E):
            bad.append((k, "sigma"))
        if mu.splits:
            if square_sum_difference(mu.splits, trees) <= 0:
                bad.append((k, "ssd"))
            if min(cauchy_schwarz_margins(mu.splits, trees)) <= 0:
                bad.append((k, "cauchy-schwarz"))
    return not bad, f"{len(bad)} violations" + (f", first {bad[:3]}" if bad else "")


@criterion(6, "oracle equivalence, 1000 random pairs")
def oracle_equivalence():
    rng = random.Random(6)
    worst, broken = 0.0, 0
    for _ in range(1000):
        taxa = make_taxa(rng.randint(4, 7))
        a = random_tree(taxa, rng, collapse=0.2)
        b = random_tree(taxa, rng, collapse=0.2)
        p = geodesic(a, b)
        worst = max(worst, abs(p.length - brute_force_distance(a, b)))
        broken += not check_properties(p.support, a, b).ok
    return worst <= 1e-9 and broken == 0, f"max |difference| {worst:.2e}, {broken} supports failing P0-P3"


@criterion(7, "log-map isometry and chain residual")
def log_map_isometry():
    rng = random.Random(7)
    worst = 0.0
    for _ in range(500):
        taxa = make_taxa(rng.randint(4, 8))
        base = random_tree(taxa, rng, collapse=0.2, pendant=False)
        T = random_tree(taxa, rng, collapse=0.2, pendant=False)
        worst = max(worst, abs((log_map(T, base) - embed(base)).norm() - distance(base, T)))
    mu = tree({S2: 2 / 3, S3: 1 / 3})
    phis = [project_tangent(log_map(T, mu), {S2, S3}) for T in chain_family()]
    hand = [(0.0, -3.0), (3.0, 0.0), (-1.0, 4.0)]
    hand_ok = all(
        abs(v[S2] - h[0]) <= 1e-9 and abs(v[S3] - h[1]) <= 1e-9 for v, h in zip(phis, hand)
    )
    res = condition_ii_residual(mu, chain_family())
    ok = worst <= 1e-9 and res <= 1e-9 and hand_ok
    return ok, f"max isometry error {worst:.2e}, residual {res:.2e}, hand values match: {hand_ok}"


@criterion(8, "common-split decomposition, 100 instances")
def decomposition():
    rng = random.Random(8)
    worst_d, worst_w = 0.0, 0.0
    for _ in range(100):
        taxa = make_taxa(rng.randint(5, 7))
        first = random_tree(taxa, rng, pendant=False)
        s = rng.choice(sorted(first.splits))
        trees = [first]
        while len(trees) < rng.randint(2, 5):
            T = random_tree(taxa, rng, pendant=False)
            if s in T.splits:
                trees.append(T)
        split_mean, _, _ = mean(trees)
        direct, _, _ = mean(trees, MeanOptions(decompose=False))
        avg = sum(T.weight(s) for T in trees) / len(trees)
        worst_d = max(worst_d, distance(split_mean, direct))
        worst_w = max(worst_w, abs(split_mean.weight(s) - avg))
    return worst_d <= 1e-2 and worst_w <= 1e-12, f"max distance {worst_d:.2e}, max shared-weight error {worst_w:.2e}"


@criterion(9, "Newick round trip, 200 random trees")
def newick_round_trip():
    rng = random.Random(9)
    worst, mismatched = 0.0, 0
    for k in range(200):
        taxa = make_taxa(rng.randint(4, 12))
        T = random_tree(taxa, rng, collapse=0.0 if k % 2 else 0.4)
        U = parse_tree(write_newick(T), taxa)
        if U.splits != T.splits:
            mismatched += 1
            continue
        worst = max([worst] + [abs(U.weight(s) - x) for s, x in T.items()])
        worst = max([worst] + [abs(a - b) for a, b in zip(U.pendant, T.pendant)])
    return mismatched == 0 and worst <= 1e-12, f"{mismatched} split-set mismatches, max weight error {worst:.1e}"


CRITERIA = [
    cone_geodesic, sticky_nine, sticky_origin, sticky_twelve, split_sums,
    chain_ssd, sigma_sufficiency, oracle_equivalence, log_map_isometry,
    decomposition, newick_round_trip,
]


@pytest.mark.parametrize("check", CRITERIA, ids=lambda c: f"criterion_{c.number}")
def test_criterion(check):
    ok, line = check()
    assert ok, line


def main():
    results = [check()[0] for check in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
