"""Command-line front end.

    bhv <dist|geodesic|mean|check-mean|conditions|logmap> FILE [options]

Input files hold one Newick tree per line; blank lines and lines starting
with ``#`` are skipped.  Exit status: 0 success, 1 usage, 2 unparsable input,
3 numerical or verification failure.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .conditions import prune_orthants
from .core import Split, TaxonSet, Tree
from .frechet import MeanOptions, NumericalError, frechet_value, mean, verify_mean
from .geodesic import check_properties, geodesic, pairwise_distances, point_along
from .newick import NewickError, parse_newick, write_newick
from .tangent import log_map

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("dist", "geodesic", "mean", "check-mean", "conditions", "logmap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunConfig:
    path: str
    command: str
    tol: float = 1e-8
    max_iter: int = 100000
    seed: int = 0
    fmt: str = "text"
    pair: tuple[int, int] | None = None
    lam: float | None = None
    base: int | None = None
    direction_budget: int = 64


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bhv", description="Geodesics and Fréchet means in BHV treespace.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("file", help="trees, one Newick string per line")
    p.add_argument("--pair", nargs=2, type=int, metavar=("I", "J"))
    p.add_argument("--lambda", dest="lam", type=float, metavar="X")
    p.add_argument("--base", type=int, metavar="I")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction-budget", type=int, default=64)
    p.add_argument("--format", choices=("text", "json"), default="text")
    return p


def config_from_args(ns) -> RunConfig:
    cfg = RunConfig(
        path=ns.file,
        command=ns.command,
        tol=ns.tol,
        max_iter=ns.max_iter,
        seed=ns.seed,
        fmt=ns.format,
        pair=tuple(ns.pair) if ns.pair else None,
        lam=ns.lam,
        base=ns.base,
        direction_budget=ns.direction_budget,
    )
    if cfg.lam is not None and not 0.0 <= cfg.lam <= 1.0:
        raise UsageError("--lambda must lie in [0, 1]")
    if cfg.tol <= 0 or cfg.max_iter < 1 or cfg.direction_budget < 0:
        raise UsageError("--tol and --max-iter must be positive, --direction-budget nonnegative")
    return cfg


# -- input ------------------------------------------------------------------------


def read_lines(text: str) -> list[tuple[int, str]]:
    out = []
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s and not s.startswith("#"):
            out.append((no, s))
    return out


class InputError(Exception):
    pass


def natural_key(label: str):
    return [(0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.findall(r"\d+|\D+", label)]


def parse_lines(text: str, name: str = "<input>") -> list[Tree]:
    """Parse one tree per line; leaves are ordered naturally by label."""
    trees, taxa = [], None
    for no, line in read_lines(text):
        try:
            if taxa is None:
                first = parse_newick(line).taxa
                taxa = TaxonSet(sorted(first.labels, key=natural_key))
            doc = parse_newick(line, taxa)
        except NewickError as exc:
            raise InputError(f"{name}:{no}:{exc.column}: {exc.message}") from exc
        taxa = doc.taxa
        trees.extend(doc.trees)
    if not trees:
        raise InputError(f"{name}: no trees found")
    return trees


# -- output -----------------------------------------------------------------------


def num(x: float) -> float:
    return float(f"{x:.12g}")


def split_key(s: Split) -> str:
    return s.label()


def set_key(S) -> str:
    return "{" + ", ".join(split_key(s) for s in sorted(S)) + "}"


def tree_json(T: Tree) -> dict:
    return {split_key(s): num(x) for s, x in sorted(T.items())}


def emit(obj, cfg: RunConfig, text: str | None = None) -> None:
    if cfg.fmt == "json" or text is None:
        sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _index(i: int, trees, what: str) -> int:
    if not 0 <= i < len(trees):
        raise UsageError(f"{what} index {i} out of range (0..{len(trees) - 1})")
    return i


def _pair(cfg: RunConfig, trees) -> tuple[int, int]:
    if cfg.pair is None:
        if len(trees) < 2:
            raise UsageError("need at least two trees")
        return 0, 1
    return _index(cfg.pair[0], trees, "pair"), _index(cfg.pair[1], trees, "pair")


# -- commands ---------------------------------------------------------------------


_WORKER_TREES: list[Tree] = []


def _worker_init(text):
    global _WORKER_TREES
    _WORKER_TREES = parse_lines(text)


def _worker_row(i):
    T = _WORKER_TREES
    return [geodesic(T[i], T[j]).length for j in range(i + 1, len(T))]


def distance_matrix(trees, text: str | None = None) -> list[list[float]]:
    """All pairwise distances, spread over ``BHV_THREADS`` processes when set above 1."""
    try:
        workers = int(os.environ.get("BHV_THREADS", "1"))
    except ValueError:
        workers = 1
    r = len(trees)
    if workers <= 1 or text is None or r < 3:
        return pairwise_distances(trees)
    D = [[0.0] * r for _ in range(r)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=(text,)) as ex:
        for i, row in enumerate(ex.map(_worker_row, range(r))):
            for k, d in enumerate(row):
                j = i + 1 + k
                D[i][j] = D[j][i] = d
    return D


def cmd_distance(cfg: RunConfig, trees, text=None):
    if cfg.pair is not None:
        i, j = _pair(cfg, trees)
        d = geodesic(trees[i], trees[j]).length
        emit({"pair": [i, j], "distance": num(d)}, cfg, repr(num(d)))
        return
    if len(trees) < 2:
        raise UsageError("need at least two trees")
    D = distance_matrix(trees, text)
    rows = [[num(x) for x in row] for row in D]
    emit(
        {"n": len(trees), "distances": rows},
        cfg,
        "\n".join("\t".join(repr(x) for x in row) for row in rows),
    )


def cmd_geodesic(cfg: RunConfig, trees, text=None):
    i, j = _pair(cfg, trees)
    path = geodesic(trees[i], trees[j])
    props = check_properties(path.support, trees[i], trees[j])
    report = {
        "pair": [i, j],
        "length": num(path.length),
        "common": sorted(split_key(s) for s in path.support.common),
        "pairs": [
            {"A": sorted(split_key(s) for s in A), "B": sorted(split_key(s) for s in B), "ratio": num(r)}
            for (A, B), r in zip(path.support.pairs, path.ratios())
        ],
        "properties": {"P0": props.p0, "P1": props.p1, "P2": props.p2, "P3": props.p3},
    }
    lines = [f"length\t{num(path.length)!r}", "common\t" + set_key(path.support.common)]
    for k, ((A, B), r) in enumerate(zip(path.support.pairs, path.ratios()), 1):
        lines.append(f"pair {k}\t{set_key(A)} -> {set_key(B)}\tratio {num(r)!r}")
    if cfg.lam is not None:
        P = point_along(path, cfg.lam)
        report["lambda"] = cfg.lam
        report["point"] = tree_json(P)
        report["point_newick"] = write_newick(P, 12)
        lines.append(f"point\t{write_newick(P, 12)}")
    emit(report, cfg, "\n".join(lines))


def _options(cfg: RunConfig) -> MeanOptions:
    return MeanOptions(
        max_iter=cfg.max_iter, seed=cfg.seed, tol=cfg.tol, direction_budget=cfg.direction_budget
    )


def conditions_json(report) -> dict:
    return {
        "sigma": {split_key(s): num(v) for s, v in sorted(report.sigma.items())},
        "must_include": sorted(split_key(s) for s in report.must_include),
        "ssd": {set_key(S): num(v) for S, v in sorted(report.ssd_by_candidate.items(), key=_sk)},
        "surviving_orthants": [sorted(split_key(s) for s in S) for S in report.surviving_orthants],
        "candidate_orthants": [sorted(split_key(s) for s in S) for S in report.candidate_orthants],
        "excluded_closures": [sorted(split_key(s) for s in S) for S in report.excluded_closures],
        "truncated": report.truncated,
    }


def _sk(item):
    S = item[0]
    return (len(S), sorted(s.sort_key() for s in S))


def certificate_json(cert) -> dict:
    worst = max((v for _, v in cert.condition_i_checks), default=None)
    return {
        "verdict": cert.verdict,
        "residual": num(cert.condition_ii_residual),
        "directions_checked": len(cert.condition_i_checks),
        "families": cert.families,
        "certified_families": cert.certified_families,
        "max_inner_product": None if worst is None else num(worst),
    }


def cmd_mean(cfg: RunConfig, trees, text=None):
    try:
        mu, cert, report = mean(trees, _options(cfg))
    except NumericalError as exc:
        out = {"error": str(exc)}
        if exc.certificate is not None:
            out["certificate"] = certificate_json(exc.certificate)
        sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
        return EXIT_NUMERIC
    obj = {
        "mean_newick": write_newick(mu, 12),
        "mean": tree_json(mu),
        "frechet_value": num(frechet_value(mu, trees)),
        "certificate": certificate_json(cert),
        "conditions": conditions_json(report),
    }
    if cfg.fmt == "json":
        emit(obj, cfg)
    else:
        sys.stdout.write(obj["mean_newick"] + "\n" + json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_check_mean(cfg: RunConfig, trees, text=None):
    b = _index(0 if cfg.base is None else cfg.base, trees, "base")
    others = [T for k, T in enumerate(trees) if k != b]
    if not others:
        raise UsageError("need input trees besides the candidate")
    scale = 1.0 + max(T.norm() for T in others)
    cert = verify_mean(trees[b], others, cfg.tol * scale, cfg.direction_budget, cfg.seed)
    obj = certificate_json(cert)
    obj["candidate"] = tree_json(trees[b])
    obj["checks"] = [
        {"direction": {split_key(s): num(x) for s, x in sorted(w.items())}, "value": num(v)}
        for w, v in cert.condition_i_checks
    ]
    emit(obj, cfg, f"{cert.verdict}\tresidual {num(cert.condition_ii_residual)!r}")
    return EXIT_OK if cert.verdict != "fail" else EXIT_NUMERIC


def cmd_conditions(cfg: RunConfig, trees, text=None):
    report = prune_orthants(trees)
    obj = conditions_json(report)
    lines = ["split\tsigma"]
    lines += [f"{split_key(s)}\t{num(v)!r}" for s, v in sorted(report.sigma.items())]
    lines.append("must_include\t" + set_key(report.must_include))
    lines.append("orthant\tssd\tstatus")
    for S, v in sorted(report.ssd_by_candidate.items(), key=_sk):
        reason = _exclusion(report, S)
        lines.append(f"{set_key(S)}\t{num(v)!r}\t{reason or 'kept'}")
    lines.append("surviving\t" + " ".join(set_key(S) for S in report.surviving_orthants))
    lines.append("candidates\t" + " ".join(set_key(S) for S in report.candidate_orthants))
    obj["exclusions"] = {
        set_key(S): r for S in report.ssd_by_candidate if (r := _exclusion(report, S))
    }
    emit(obj, cfg, "\n".join(lines))


def _exclusion(report, S):
    if report.ssd_by_candidate.get(S, 1.0) <= 0.0:
        return "square-sum difference not positive"
    for C in report.excluded_closures:
        if C <= S:
            return "closure of " + set_key(C) + " fails"
    return None


def cmd_logmap(cfg: RunConfig, trees, text=None):
    b = _index(0 if cfg.base is None else cfg.base, trees, "base")
    base = trees[b]
    maps = []
    lines = []
    for k, T in enumerate(trees):
        v = log_map(T, base)
        coords = {split_key(s): num(x) for s, x in v.items()}
        maps.append({"tree": k, "coords": coords})
        lines.append(f"{k}\t" + ", ".join(f"{s}: {x!r}" for s, x in coords.items()))
    emit({"base": b, "log_maps": maps}, cfg, "\n".join(lines))


HANDLERS = {
    "dist": cmd_distance,
    "geodesic": cmd_geodesic,
    "mean": cmd_mean,
    "check-mean": cmd_check_mean,
    "conditions": cmd_conditions,
    "logmap": cmd_logmap,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = config_from_args(ns)
        try:
            with open(cfg.path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read {cfg.path}: {exc.strerror}") from exc
        trees = parse_lines(text, cfg.path)
        status = HANDLERS[cfg.command](cfg, trees, text)
    except UsageError as exc:
        sys.stderr.write(f"bhv: error: {exc}\n")
        return EXIT_USAGE
    except InputError as exc:
        sys.stderr.write(f"bhv: parse error: {exc}\n")
        return EXIT_PARSE
    except NumericalError as exc:
        sys.stderr.write(f"bhv: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK if status is None else status


if __name__ == "__main__":
    sys.exit(main())
