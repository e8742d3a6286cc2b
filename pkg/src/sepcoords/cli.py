"""``sepctl``: command-line front end.

Exit codes: 0 PASS, 1 verification FAIL, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .bivector import DEFAULT_TOL, BivectorForm, Tolerances, plucker_count
from .charts import (
    DressedTree,
    chart_from_tree,
    elliptic_form,
    emit_gridlines,
    graft_dressed,
    sphere_compose,
    stackel_of_chart,
    verify_orthogonal,
)
from .integrability import StackelError, residual_report, stackel_from_killing, verify_stackel
from .trees import (
    TreeSyntaxError,
    count_faces,
    dyslectic_classes,
    enumerate_trees,
    graft,
    moduli_count,
    parse_tree,
    serialize_tree,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
VERSION = f"sepctl {__version__}"


class UsageError(Exception):
    pass


# -- argument parsing ---------------------------------------------------------------

def _env_seed() -> int:
    raw = os.environ.get("SEPCTL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SEPCTL_SEED must be an integer, got {raw!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $SEPCTL_SEED or 0)")
    p.add_argument("--points", type=int, default=None, help="number of sample points")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    for name in ("unit", "rank", "commute", "nijenhuis", "gap", "metric"):
        p.add_argument(f"--tol-{name}", type=float, default=getattr(DEFAULT_TOL, name),
                       help=f"default {getattr(DEFAULT_TOL, name):g}")
    p.add_argument("--tol-killing", type=float, default=1e-10, help="default 1e-10")
    return p


def _form_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("form_file", nargs="?", help="BivectorForm JSON file ('-' for stdin)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--elliptic", help="comma-separated increasing parameters e_0,...,e_n")
    g.add_argument("--identity", action="store_true", help="identity form (needs --n)")
    g.add_argument("--random", action="store_true", help="generic random form (needs --n)")
    p.add_argument("--n", type=int, default=None, help="sphere dimension for --identity/--random")


def _tree_source(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--tree", required=required, help="tree text, e.g. '((*,*),*)'")
    p.add_argument("--params", default=None,
                   help="JSON map node path -> parameters, or @file; e.g. '{\"\": [0, 1, 4]}'")
    p.add_argument("--leaf-axes", default=None, help="comma-separated ambient axis per leaf")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="sepctl", description="Separable coordinates on spheres.")
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="Killing and Nijenhuis residuals of a form")
    _form_source(p)

    p = sub.add_parser("stackel", parents=[common], help="Stäckel system of a form or a dressed tree")
    _form_source(p)
    _tree_source(p, required=False)

    p = sub.add_parser("trees", parents=[common], help="enumerate trees and count faces")
    p.add_argument("L", type=int, help="number of leaves")
    p.add_argument("--m", type=int, default=None, help="only codimension m")
    p.add_argument("--classes", action="store_true", help="report dyslectic classes")

    p = sub.add_parser("grid", parents=[common], help="grid lines of an S^2 chart")
    _tree_source(p, required=True)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--lines", type=int, default=9, help="curves per family")

    p = sub.add_parser("compose", parents=[common], help="graft trees and check chart composition")
    p.add_argument("outer", help="outer tree")
    p.add_argument("subtrees", nargs="+", help="one tree per leaf of the outer tree ('*' keeps the leaf)")
    return parser


def _tolerances(args) -> Tolerances:
    return replace(DEFAULT_TOL, unit=args.tol_unit, rank=args.tol_rank, commute=args.tol_commute,
                   nijenhuis=args.tol_nijenhuis, gap=args.tol_gap, metric=args.tol_metric)


def _parse_tree(text: str):
    try:
        return parse_tree(text)
    except TreeSyntaxError as exc:
        raise UsageError(f"tree syntax error: {exc}") from None


def _read_text(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {what}: {exc}") from None


def _load_form(args) -> tuple[BivectorForm, str]:
    sources = [args.form_file is not None, args.elliptic is not None, args.identity, args.random]
    if sum(sources) != 1:
        raise UsageError("give exactly one of: form file, --elliptic, --identity, --random")
    if args.form_file is not None:
        try:
            return BivectorForm.from_json(_read_text(args.form_file)), args.form_file
        except (ValueError, TypeError) as exc:
            raise UsageError(f"bad form file: {exc}") from None
    if args.elliptic is not None:
        try:
            vals = [_number(v) for v in args.elliptic.split(",")]
            return elliptic_form(vals).form, f"elliptic({args.elliptic})"
        except ValueError as exc:
            raise UsageError(f"bad --elliptic: {exc}") from None
    if args.n is None or args.n < 1:
        raise UsageError("--identity/--random need --n >= 1")
    if args.identity:
        return BivectorForm.identity(args.n), "identity"
    return BivectorForm.random(args.n, np.random.default_rng(args.seed)), "random"


def _number(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


def _load_dressed(args) -> DressedTree:
    tree = _parse_tree(args.tree)
    params = {}
    if args.params:
        text = _read_text(args.params[1:]) if args.params.startswith("@") else args.params
        params = _load_json(text, "--params")
        if not isinstance(params, dict):
            raise UsageError("--params must be a JSON object mapping node paths to lists")
    axes = ()
    if args.leaf_axes:
        try:
            axes = tuple(int(a) for a in args.leaf_axes.split(","))
        except ValueError:
            raise UsageError("--leaf-axes must be comma-separated integers") from None
    if tree.is_leaf:
        raise UsageError("tree must have at least one internal node")
    try:
        return DressedTree.make(tree, params, axes)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad tree parameters: {exc}") from None


# -- commands ------------------------------------------------------------------------

def cmd_verify(args) -> tuple[dict, int]:
    B, source = _load_form(args)
    tol = _tolerances(args)
    points = args.points or 20
    rep, simple = residual_report(B, points, args.seed, tol, tol_killing=args.tol_killing)
    out = {"command": "verify", "source": source, "n": B.n, "report": rep.to_dict(),
           "simple_fraction": simple, "tol_killing": args.tol_killing}
    return out, EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_stackel(args) -> tuple[dict, int]:
    tol = _tolerances(args)
    if args.tree is not None:
        if args.form_file or args.elliptic or args.identity or args.random:
            raise UsageError("give either a form or --tree, not both")
        d = _load_dressed(args)
        source = {"tree": serialize_tree(d.tree), "params": d.params_json(), "leaf_axes": list(d.leaf_axes)}
        solve = lambda: stackel_of_chart(d, args.points, args.seed, tol.rank, tol)
        n = d.n
    else:
        B, name = _load_form(args)
        source = name
        solve = lambda: stackel_from_killing(B, args.points, args.seed, tol.rank, tol)
        n = B.n
    out = {"command": "stackel", "source": source, "n": n}
    try:
        S = solve()
    except StackelError as exc:
        out["error"] = str(exc)
        out["spectrum"] = exc.spectrum
        out["verdict"] = "FAIL"
        return out, EXIT_FAIL
    rep = verify_stackel(S, 20, args.seed + 1000, tol.commute, tol.gap)
    out["system"] = S.to_dict()
    out["zero_tensor_forms"] = plucker_count(n)
    out["raw_nullspace_dimension"] = n + plucker_count(n)
    out["report"] = rep.to_dict()
    out["verdict"] = rep.verdict
    return out, EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_trees(args) -> tuple[dict, int]:
    L = args.L
    if L < 2:
        raise UsageError("L must be >= 2")
    if args.m is not None and not 0 <= args.m <= L - 2:
        raise UsageError(f"m must lie in 0..{L - 2}")
    counts = count_faces(L)
    out = {"command": "trees", "L": L, "counts": {str(m): c for m, c in counts.items()},
           "total": sum(counts.values()), "vertices": counts[L - 2]}
    ms = [args.m] if args.m is not None else list(range(L - 1))
    out["trees"] = [{"codimension": m, "dimension": L - 2 - m, "tree": serialize_tree(t)}
                    for m in ms for t in enumerate_trees(L, m)]
    if args.classes:
        cls = dyslectic_classes(L, args.m)
        out["classes"] = len(cls)
        out["class_members"] = {serialize_tree(k): [serialize_tree(t) for t in v] for k, v in cls.items()}
    return out, EXIT_PASS


def cmd_grid(args) -> tuple[dict | str, int]:
    d = _load_dressed(args)
    if d.n != 2:
        raise UsageError(f"grid is only defined for S^2 (tree has {d.tree.leaves} leaves, n={d.n})")
    if args.resolution < 2 or args.lines < 1:
        raise UsageError("--resolution must be >= 2 and --lines >= 1")
    lines = emit_gridlines(chart_from_tree(d), args.resolution, args.lines)
    if args.format == "csv":
        buf = io.StringIO()
        buf.write(f"# {VERSION} tree={serialize_tree(d.tree)} params={json.dumps(d.params_json(), sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["curve_id", "t_index", "x0", "x1", "x2"])
        for pl in lines:
            for t, x in enumerate(pl.points):
                w.writerow([pl.curve_id, t] + [repr(float(v)) for v in x])
        return buf.getvalue(), EXIT_PASS
    out = {"command": "grid", "tree": serialize_tree(d.tree), "params": d.params_json(),
           "curves": [{"curve_id": pl.curve_id, "family": pl.family, "level": pl.level,
                       "points": pl.points.tolist()} for pl in lines]}
    return out, EXIT_PASS


def cmd_compose(args) -> tuple[dict, int]:
    outer = _parse_tree(args.outer)
    subs = [_parse_tree(s) for s in args.subtrees]
    if outer.is_leaf:
        raise UsageError("outer tree must have at least one internal node")
    if len(subs) != outer.leaves:
        raise UsageError(f"outer tree has {outer.leaves} leaves but {len(subs)} subtrees were given")
    t = graft(outer, subs)
    out = {"command": "compose", "tree": serialize_tree(t), "leaves": t.leaves,
           "moduli": moduli_count(t), "face_dimension": moduli_count(t)}
    # functoriality check on default (equispaced) parameters
    d_outer = DressedTree.make(outer)
    d_subs = [None if s.is_leaf else DressedTree.make(s) for s in subs]
    composed = chart_from_tree(graft_dressed(d_outer, d_subs))
    from .charts import point_chart

    parts = [point_chart() if s is None else chart_from_tree(s) for s in d_subs]
    direct = _compose_by_tree(d_outer, parts)
    u = composed.sample(args.points or 50, args.seed)
    dev = float(np.abs(composed(u) - direct(u)).max())
    ortho = verify_orthogonal(composed, 20, args.seed)
    out["functoriality_deviation"] = dev
    out["orthogonality"] = ortho.max_offdiag
    passed = dev < 1e-12 and ortho.passed
    out["verdict"] = "PASS" if passed else "FAIL"
    return out, EXIT_PASS if passed else EXIT_FAIL


def _compose_by_tree(d: DressedTree, leaf_charts):
    """Compose the outer tree's blocks directly with the given leaf charts."""
    from .charts import elliptic_chart

    it = iter(leaf_charts)

    def build(path, s):
        if s.is_leaf:
            return next(it)
        kids = [build(path + (i,), c) for i, c in enumerate(s.children)]
        return sphere_compose(elliptic_chart(d.params[path]), kids)

    return build((), d.tree)


COMMANDS = {"verify": cmd_verify, "stackel": cmd_stackel, "trees": cmd_trees,
            "grid": cmd_grid, "compose": cmd_compose}


# -- output -------------------------------------------------------------------------------

def _csv_rows(result: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {VERSION} seed={result.get('seed')}\n")
    w = csv.writer(buf, lineterminator="\n")
    if result["command"] == "trees":
        w.writerow(["codimension", "dimension", "tree"])
        for row in result["trees"]:
            w.writerow([row["codimension"], row["dimension"], row["tree"]])
    else:
        w.writerow(["key", "value"])
        for key, value in sorted(_flatten(result).items()):
            w.writerow([key, value])
    return buf.getvalue()


def _flatten(obj, prefix: str = "") -> dict:
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, list) and not all(isinstance(v, (int, float)) for v in obj):
        for i, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}{i}."))
    else:
        out[prefix.rstrip(".")] = json.dumps(obj)
    return out


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.seed is None:
            args.seed = _env_seed()
        if args.points is not None and args.points < 1:
            raise UsageError("--points must be >= 1")
        result, code = COMMANDS[args.command](args)
        if isinstance(result, str):
            text = result
        else:
            result = {"version": VERSION, "seed": args.seed, **result}
            if args.format == "csv":
                text = _csv_rows(result)
            else:
                text = json.dumps(result, sort_keys=True, indent=2) + "\n"
        _emit(text, args.out)
        return code
    except UsageError as exc:
        print(f"sepctl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
