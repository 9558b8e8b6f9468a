"""Fréchet means in treespace.

The pipeline in :func:`mean` splits the problem along splits every input
agrees on, seeds each piece with the Sturm iteration, polishes the result by
exact minimisation over closed orthants, and certifies it with the tangent-cone
characterisation checked by :func:`verify_mean`.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .conditions import (
    ConditionsReport,
    cauchy_schwarz_margins,
    input_splits,
    maximal_compatible_sets,
    must_include,
    prune_orthants,
    square_sum_difference,
)
from .core import Split, TaxonSet, Tree, compatible_masks
from .geodesic import geodesic, geodesic_support, point_along, support_length
from .tangent import Direction, _unfold, directional_limit, log_map

#: weights below this are treated as zero in computed means
DROP_TOL = 1e-9
FAMILY_CAP = 512
FW_ITERS = 40


class NumericalError(RuntimeError):
    """The mean could not be certified."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


def _check_input(trees: Sequence[Tree]) -> list[Tree]:
    trees = list(trees)
    if not trees:
        raise ValueError("need at least one tree")
    taxa = trees[0].taxa
    for T in trees[1:]:
        if T.taxa != taxa:
            raise ValueError("trees are defined over different taxa")
    return trees


def frechet_value(T: Tree, trees: Sequence[Tree]) -> float:
    """Sum of squared distances from ``T`` to each input tree."""
    trees = _check_input(trees)
    return sum(geodesic(T, X).length ** 2 for X in trees)


def _drop_small(T: Tree, tol: float = DROP_TOL) -> Tree:
    return T._replace({s: x for s, x in T._w.items() if x >= tol})


def iterative_mean(trees: Sequence[Tree], max_iter: int = 10000, seed: int = 0, tol: float = 1e-10) -> Tree:
    """Sturm's inductive mean with a reshuffled input order in every epoch.

    Step ``k`` moves the running estimate a fraction ``1/(k+1)`` of the way
    toward the next tree.  Iteration ends after ``max_iter`` steps or after an
    epoch that moved the estimate less than ``tol``.
    """
    trees = _check_input(trees)
    rng = random.Random(seed)
    order = list(range(len(trees)))
    M = None
    k = 0
    while k < max_iter:
        rng.shuffle(order)
        start = M
        for i in order:
            if M is None:
                M = trees[i]
            else:
                M = point_along(geodesic(M, trees[i]), 1.0 / (k + 1))
            k += 1
            if k >= max_iter:
                break
        if start is not None and geodesic(start, M).length < tol:
            break
    return _drop_small(M)


# -- verification -----------------------------------------------------------


@dataclass
class MeanCertificate:
    candidate: Tree
    condition_ii_residual: float
    condition_i_checks: list = field(default_factory=list)
    verdict: str = "inconclusive"
    certified_families: int = 0
    families: int = 0
    violation: dict | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def condition_ii_residual(mu: Tree, trees: Sequence[Tree]) -> float:
    """Distance between ``mu`` and the average of the inputs' log maps restricted to E(mu)."""
    r = len(trees)
    S = mu._w
    acc = dict.fromkeys(S, 0.0)
    for T in trees:
        v = log_map(T, mu).coords
        for s in S:
            acc[s] += v.get(s, 0.0)
    total = sum((x - acc[s] / r) ** 2 for s, x in S.items())
    for i, p in enumerate(mu._pendant):
        total += (p - sum(T._pendant[i] for T in trees) / r) ** 2
    return math.sqrt(total)


def _tangent_sum(trees, w: Direction):
    """Sum over inputs of the directional limits, restricted to the extension splits."""
    acc = dict.fromkeys(w.extension, 0.0)
    for T in trees:
        v = directional_limit(T, w).coords
        for s in acc:
            acc[s] += v.get(s, 0.0)
    return acc


def _inner(w: Direction, G) -> float:
    return sum(w.coords[s] * G[s] for s in w.extension)


def direction_value(w: Direction, trees: Sequence[Tree]) -> float:
    """Inner product of ``w`` with the summed directional limits over its extension."""
    return _inner(w, _tangent_sum(trees, w))


def _certify_family(mu, F, trees, tol, checks):
    """Frank-Wolfe over the simplex of directions into ``F``.

    The summed directional limit at any interior direction bounds the inner
    product from above across the whole family, so a bound at or below
    ``tol`` certifies every direction into ``F``.  Returns ``("pass", None)``,
    ``("fail", direction)`` or ``("open", None)``.
    """
    F = sorted(F)
    m = len(F)
    x = [1.0 / m] * m
    for it in range(FW_ITERS):
        nrm = math.sqrt(sum(t * t for t in x))
        w = Direction({s: t / nrm for s, t in zip(F, x)}, mu)
        G = _tangent_sum(trees, w)
        val = _inner(w, G)
        if val > tol:
            checks.append((dict(w.coords), val))
            return "fail", w
        g = [G[s] for s in F]
        # h(w') <= <G, w'> for every unit w'; bound by the positive part
        bound = math.sqrt(sum(max(t, 0.0) ** 2 for t in g))
        if bound <= tol:
            checks.append((dict(w.coords), val))
            return "pass", None
        j = max(range(m), key=g.__getitem__)
        gamma = 2.0 / (it + 3)
        x = [(1 - gamma) * t for t in x]
        x[j] += gamma
    checks.append((dict(w.coords), val))
    return "open", None


def verify_mean(
    mu: Tree,
    trees: Sequence[Tree],
    tol: float = 1e-8,
    direction_budget: int = 64,
    seed: int = 0,
) -> MeanCertificate:
    """Check the two conditions characterising the mean.

    Condition (ii) is the stationarity residual inside the orthant of ``mu``.
    Condition (i) asks that no direction leaving that orthant toward further
    input splits is a descent direction.  Every axis direction is checked,
    then each maximal compatible family of extension splits is certified with
    a supergradient bound; ``direction_budget`` random directions are then
    sampled from any family left uncertified.  The verdict is ``pass`` only when every family is
    certified; ``inconclusive`` when some family could not be certified but
    no violation was seen.
    """
    trees = _check_input(trees)
    cert = MeanCertificate(mu, condition_ii_residual(mu, trees))
    S = mu.splits
    cand = sorted(
        s for s in input_splits(trees)
        if s not in S and all(compatible_masks(s.mask, t.mask) for t in S)
    )
    checks = cert.condition_i_checks
    violation = None
    for s in cand:
        w = Direction.axis(s, mu)
        val = direction_value(w, trees)
        checks.append(({s: 1.0}, val))
        if val > tol and violation is None:
            violation = w
    families, truncated = maximal_compatible_sets(cand, (), FAMILY_CAP) if cand else ([], False)
    cert.families = len(families)
    # certified families need no sampling; a truncated list leaves everything open
    uncertified = list(families) if truncated else []
    if violation is None:
        for F in families:
            if len(F) == 1:
                cert.certified_families += 1
                continue
            status, w = _certify_family(mu, F, trees, tol, checks)
            if status == "fail":
                violation = w
                break
            if status == "pass":
                cert.certified_families += 1
            elif not truncated:
                uncertified.append(F)
    if violation is None and uncertified:
        rng = random.Random(seed)
        for _ in range(direction_budget):
            F = sorted(rng.choice(uncertified))
            sub = rng.sample(F, rng.randint(1, len(F)))
            coords = {s: rng.random() + 1e-3 for s in sub}
            nrm = math.sqrt(sum(t * t for t in coords.values()))
            w = Direction({s: t / nrm for s, t in coords.items()}, mu)
            val = direction_value(w, trees)
            checks.append((dict(w.coords), val))
            if val > tol:
                violation = w
                break
    if violation is not None:
        cert.violation = dict(violation.coords)
    if cert.condition_ii_residual > tol or violation is not None:
        cert.verdict = "fail"
    elif uncertified:
        cert.verdict = "inconclusive"
    else:
        cert.verdict = "pass"
    return cert


# -- decomposition ----------------------------------------------------------


@dataclass
class Subproblem:
    """Trees restricted to one piece; ``blocks[i]`` is the leaf mask behind piece leaf ``i``."""

    taxa: TaxonSet
    trees: list[Tree]
    blocks: list[int]


@dataclass
class Decomposition:
    taxa: TaxonSet
    shared: list[tuple[Split, float]]
    pendant: tuple[float, ...]
    subproblems: list[Subproblem]


def common_splits(trees: Sequence[Tree]) -> frozenset[Split]:
    """Input splits compatible with every split of every input."""
    E = input_splits(trees)
    return frozenset(s for s in E if all(compatible_masks(s.mask, t.mask) for t in E))


def _block_label(taxa, mask):
    idx = [i for i in range(taxa.n) if (mask >> i) & 1]
    if len(idx) == 1:
        return taxa.labels[idx[0]]
    return "[" + ",".join(taxa.labels[i] for i in idx) + "]"


def decompose_common(trees: Sequence[Tree]) -> Decomposition:
    """Cut every input along the splits all inputs are compatible with.

    Each such split gets the average of its weights, pendant lengths are
    averaged leaf by leaf, and the rest of each tree falls into independent
    pieces, one per vertex of the tree those shared splits form.
    """
    trees = _check_input(trees)
    taxa = trees[0].taxa
    r = len(trees)
    K = sorted(common_splits(trees))
    shared = [(s, sum(T.weight(s) for T in trees) / r) for s in K]
    pendant = tuple(sum(T._pendant[i] for T in trees) / r for i in range(taxa.n))
    full = taxa.full_mask
    # pieces are the vertices of the tree made of K, rooted next to leaf 0
    clusters = [full & ~1] + [s.mask for s in K]
    pieces = []
    for C in clusters:
        inner = [D for D in clusters if D != C and D & C == D]
        children = [D for D in inner if not any(D != E and D & E == D for E in inner)]
        rest = C
        for D in children:
            rest &= ~D
        blocks = [full & ~C] + sorted(children) + [1 << i for i in range(taxa.n) if (rest >> i) & 1]
        labels = [_block_label(taxa, b) for b in blocks]
        pieces.append((C, blocks, TaxonSet(labels)))

    def locate(mask):
        best = None
        for j, (C, _, _) in enumerate(pieces):
            if mask & C == mask and mask != C:
                if best is None or bin(C).count("1") < bin(pieces[best][0]).count("1"):
                    best = j
        return best

    Kset = set(K)
    per_piece = [[{} for _ in trees] for _ in pieces]
    for t, T in enumerate(trees):
        for s, x in T._w.items():
            if s in Kset:
                continue
            j = locate(s.mask)
            _, blocks, ptaxa = pieces[j]
            m = 0
            for i, b in enumerate(blocks):
                if b & s.mask:
                    m |= 1 << i
            per_piece[j][t][Split(m, ptaxa)] = x
    subs = []
    for (C, blocks, ptaxa), weights in zip(pieces, per_piece):
        if not any(weights):
            continue
        subs.append(Subproblem(ptaxa, [Tree(ptaxa, w, None, validate=False) for w in weights], blocks))
    return Decomposition(taxa, shared, pendant, subs)


def lift_split(s: Split, sub: Subproblem, taxa: TaxonSet) -> Split:
    """The full split corresponding to split ``s`` of a piece."""
    m = 0
    for i, b in enumerate(sub.blocks):
        if (s.mask >> i) & 1:
            m |= b
    return Split(m, taxa)


def recombine(dec: Decomposition, means: Sequence[Tree]) -> Tree:
    """Reassemble a full tree from shared weights and the means of the pieces."""
    weights = {s: x for s, x in dec.shared if x > 0.0}
    for sub, M in zip(dec.subproblems, means):
        for s, x in M._w.items():
            weights[lift_split(s, sub, dec.taxa)] = x
    return Tree(dec.taxa, weights, dec.pendant)


# -- polishing --------------------------------------------------------------


def _value_grad(v, S, trees, eps):
    """Fréchet value (interior part) and its gradient over the closed orthant of ``S``."""
    base = trees[0]._replace({s: max(x, eps) for s, x in zip(S, v)}, _ZERO[trees[0].taxa.n])
    f = 0.0
    g = np.zeros(len(S))
    for T in trees:
        sup = geodesic_support(base, T)
        d = support_length(sup, base, T._replace(T._w, base._pendant))
        f += d * d
        phi = _unfold(T, sup, base._w, {})
        for i, s in enumerate(S):
            g[i] += 2.0 * (base._w[s] - phi.get(s, 0.0))
    return f, g


class _Zeros(dict):
    def __missing__(self, n):
        self[n] = (0.0,) * n
        return self[n]


_ZERO = _Zeros()


def orthant_minimum(trees: Sequence[Tree], S: Sequence[Split], start: dict | None = None) -> dict:
    """Minimise the Fréchet function over the closed orthant spanned by ``S``."""
    S = sorted(S)
    if not S:
        return {}
    scale = 1.0 + max(T.norm() for T in trees)
    eps = 1e-12 * scale
    x0 = np.array([max((start or {}).get(s, 0.0), 0.0) for s in S])
    if not x0.any():
        x0 = np.full(len(S), 0.1 * scale / math.sqrt(len(S)))
    res = minimize(
        _value_grad,
        x0,
        args=(S, trees, eps),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * len(S),
        options={"ftol": 1e-16, "gtol": 1e-13 * scale * len(trees), "maxiter": 2000},
    )
    return {s: float(x) for s, x in zip(S, res.x) if x > eps}


def _tree_from(taxa, weights, pendant):
    return Tree(taxa, {s: x for s, x in weights.items() if x >= DROP_TOL}, pendant)


def polish(
    trees: Sequence[Tree],
    start: Tree,
    tol: float,
    forced=frozenset(),
    budget: int = 0,
    max_rounds: int = 25,
):
    """Active-set descent over orthants from ``start``.

    Each round minimises exactly over the current closed orthant, then asks
    the verifier for a descent direction leaving it; the splits of that
    direction join the orthant for the next round.
    """
    taxa = start.taxa
    r = len(trees)
    pendant = tuple(sum(T._pendant[i] for T in trees) / r for i in range(taxa.n))
    S = set(s for s in start._w if all(compatible_masks(s.mask, f.mask) for f in forced)) | set(forced)
    x = dict(start._w)
    cert = None
    for _ in range(max_rounds):
        x = orthant_minimum(trees, sorted(S), x)
        mu = _tree_from(taxa, x, pendant)
        cert = verify_mean(mu, trees, tol, budget)
        if cert.verdict != "fail":
            return mu, cert
        if cert.violation is None:
            # not stationary inside the orthant; polish again from here
            S = set(mu._w)
            continue
        S = set(mu._w) | set(cert.violation)
        x = dict(mu._w)
    return mu, cert


# -- pipeline ---------------------------------------------------------------


@dataclass
class MeanOptions:
    max_iter: int = 100000
    seed: int = 0
    tol: float = 1e-8
    direction_budget: int = 64
    restarts: int = 3
    #: Sturm steps per input tree before polishing
    warm_steps: int = 10
    decompose: bool = True
    conditions: bool = True


def _tolerance(trees, tol):
    return tol * (1.0 + max(T.norm() for T in trees))


def _solve_piece(trees, options: MeanOptions):
    """Mean of trees that share no common split, with its certificate."""
    r = len(trees)
    taxa = trees[0].taxa
    tol = _tolerance(trees, options.tol)
    if not any(T._w for T in trees):
        mu = Tree(taxa, {}, None)
        return mu, verify_mean(mu, trees, tol, options.direction_budget, options.seed)
    forced = must_include(trees)
    steps = min(options.max_iter, options.warm_steps * r)
    cert = None
    for attempt in range(options.restarts + 1):
        start = iterative_mean(trees, max_iter=steps, seed=options.seed + attempt)
        mu, cert = polish(trees, start, tol, forced, options.direction_budget)
        if cert.verdict == "fail":
            # snap near-zero coordinates to the boundary and look again
            snapped = mu._replace({s: x for s, x in mu._w.items() if x > 1e-6 * (1 + mu.norm())})
            if snapped._w != mu._w:
                mu, cert = polish(trees, snapped, tol, forced, options.direction_budget)
        if cert.verdict != "fail" and _conditions_hold(mu, trees, forced):
            return mu, cert
        steps = min(options.max_iter, steps * 4)
    # last resort: exact minimisation over every candidate orthant
    report = prune_orthants(trees)
    best, best_f = None, math.inf
    for U in report.candidate_orthants:
        x = orthant_minimum(trees, sorted(U))
        T = _tree_from(taxa, x, None)
        f = frechet_value(T, trees)
        if f < best_f:
            best, best_f = T, f
    if best is not None:
        cert = verify_mean(best, trees, tol, options.direction_budget, options.seed)
        if cert.verdict != "fail":
            return best, cert
    raise NumericalError("mean could not be certified", cert)


def _conditions_hold(mu, trees, forced) -> bool:
    if not forced <= mu.splits:
        return False
    if mu._w:
        if square_sum_difference(mu.splits, trees) <= 0.0:
            return False
        if min(cauchy_schwarz_margins(mu.splits, trees)) <= 0.0:
            return False
    return True


def _combine(mu, trees, dec, certs, tol) -> MeanCertificate:
    """Certificate for the full mean from the certificates of its pieces.

    The Fréchet function is a sum over pieces, so a direction leaving the
    full orthant is a descent direction exactly when its part in some piece
    is; condition (i) therefore carries over piece by piece.  Condition (ii)
    is re-evaluated on the full trees.
    """
    cert = MeanCertificate(mu, condition_ii_residual(mu, trees))
    verdicts = set()
    for sub, c in zip(dec.subproblems, certs):
        verdicts.add(c.verdict)
        cert.families += c.families
        cert.certified_families += c.certified_families
        for coords, val in c.condition_i_checks:
            cert.condition_i_checks.append(
                ({lift_split(s, sub, dec.taxa): x for s, x in coords.items()}, val)
            )
    if cert.condition_ii_residual > tol or "fail" in verdicts:
        cert.verdict = "fail"
    elif "inconclusive" in verdicts:
        cert.verdict = "inconclusive"
    else:
        cert.verdict = "pass"
    return cert


def mean(trees: Sequence[Tree], options: MeanOptions | None = None):
    """Fréchet mean with its certificate and the split-condition report.

    Returns ``(mu, certificate, report)``; ``report`` is ``None`` when
    ``options.conditions`` is off.  Raises :class:`NumericalError` if the
    result cannot be certified.
    """
    trees = _check_input(trees)
    options = options or MeanOptions()
    report = prune_orthants(trees) if options.conditions else None
    tol = _tolerance(trees, options.tol)
    if options.decompose:
        dec = decompose_common(trees)
        solved = [_solve_piece(sub.trees, options) for sub in dec.subproblems]
        mu = recombine(dec, [m for m, _ in solved])
        cert = _combine(mu, trees, dec, [c for _, c in solved], tol)
    else:
        r = len(trees)
        pendant = tuple(sum(T._pendant[i] for T in trees) / r for i in range(trees[0].taxa.n))
        core, _ = _solve_piece([T._replace(T._w, _ZERO[T.taxa.n]) for T in trees], options)
        mu = core._replace(core._w, pendant)
        cert = verify_mean(mu, trees, tol, options.direction_budget, options.seed)
    forced = report.must_include if report else must_include(trees)
    if cert.verdict == "fail" or not _conditions_hold(mu, trees, forced):
        raise NumericalError("computed mean failed verification", cert)
    return mu, cert, report
