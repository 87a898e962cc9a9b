"""Command-line runner: ``superreflex {jn,sn,thm1,thm2,ramsey}``.

Tables go out as CSV or JSON (``--format``), reports as JSON. Output is
deterministic for a fixed ``--seed``. Exit codes: 0 success, 1 usage or
precondition error, 2 failed check, 3 exhausted budget.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import BudgetExhausted, CheckFailed, PreconditionError
from .extraction import extract_witness, report_to_json
from .jconvexity import (
    j_certify_grid, j_upper_search, lq_example_witness, perturbed_witness,
    witness_from_json, witness_to_json,
)
from .operators import (
    factorization_from_json, factorization_to_json, search_factorization,
    trivial_factorization,
)
from .ramsey import (
    monochromatic_search, ramsey_upper, theorem2_N_bound, tower,
)
from .spaces import TOL_ALG, format_space, is_l1, is_linf, parse_space
from .theorem1 import (
    distortion_coefficients, norming_system, shifted_system, theorem1_pipeline,
)

log = logging.getLogger("superreflex")

EXIT_USAGE, EXIT_CHECK, EXIT_BUDGET = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_range(text: str) -> list[int]:
    """``"4"`` -> ``[4]``; ``"2..5"`` -> ``[2, 3, 4, 5]`` (inclusive)."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer or range a..b: {text!r}")
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"empty or nonpositive range: {text!r}")
    return list(range(lo, hi + 1))


def _space(text: str):
    try:
        return parse_space(text)
    except PreconditionError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _write(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit_table(args, rows: list[dict], columns: list[str]):
    if args.format == "json":
        _write(args, _dump_json(rows))
        return
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row[k]) for k in columns})
    _write(args, buf.getvalue())


def _emit_report(args, report: dict):
    if args.format == "json":
        _write(args, _dump_json(report))
        return
    flat = {k: v for k, v in sorted(report.items()) if not isinstance(v, (dict, list))}
    _emit_table(args, [flat], list(flat))


# --------------------------------------------------------------------------
# commands

def cmd_jn(args) -> int:
    rows = []
    for n in args.n:
        w = j_upper_search(args.space, n, seed=args.seed, restarts=args.restarts, iters=args.iters)
        row = {"space": format_space(args.space), "n": n, "margin_best": w.margin,
               "J_upper": w.j_upper, "J_lo": None, "J_hi": None}
        if args.certify:
            enc = j_certify_grid(args.space, n, args.step, budget=args.budget)
            if enc.witness is not None and enc.witness.margin > w.margin:
                row["margin_best"], row["J_upper"] = enc.witness.margin, enc.witness.j_upper
            row["J_lo"], row["J_hi"] = enc.j_interval
        rows.append(row)
    _emit_table(args, rows, ["space", "n", "margin_best", "J_upper", "J_lo", "J_hi"])
    return 0


def cmd_sn(args) -> int:
    rows = []
    for n in args.n:
        if (is_l1(args.space) or is_linf(args.space)) and args.space.dim == n:
            fact = trivial_factorization(args.space)
        else:
            fact = search_factorization(args.space, n, seed=args.seed, restarts=args.restarts,
                                        iters=args.iters, tol=args.tol)
        row = {"space": format_space(args.space), "n": n, "sigma_best": fact.sigma,
               "defect": fact.defect}
        if args.format == "json":
            row["factorization"] = factorization_to_json(fact)
        rows.append(row)
    _emit_table(args, rows, ["space", "n", "sigma_best", "defect"])
    return 0


def cmd_thm1(args) -> int:
    if args.witness:
        w = witness_from_json(Path(args.witness).read_text())
    elif args.eps:
        w = perturbed_witness(args.n, args.eps, seed=args.seed)
    else:
        w = lq_example_witness("inf", args.n)
    eps = max(1.0 - w.margin, 0.0)
    fact = theorem1_pipeline(w.space, w, tol=args.tol)
    sys_ = shifted_system(w, norming_system(w.space, w, args.tol).y, args.tol)
    xi, det = distortion_coefficients(sys_.alpha)
    n = w.n
    report = {
        "space": format_space(w.space), "n": n, "margin": w.margin, "eps": eps,
        "band": sys_.band, "det": det, "max_abs_xi": float(np.abs(xi).max()),
        "sigma": fact.sigma, "sigma_budget": 1.0 + 2.0 * n * n * eps, "defect": fact.defect,
        "witness": witness_to_json(w), "factorization": factorization_to_json(fact),
    }
    _emit_report(args, report)
    return 0


def cmd_thm2(args) -> int:
    if args.factorization:
        fact = factorization_from_json(Path(args.factorization).read_text(), args.tol)
    elif args.space is not None:
        fact = trivial_factorization(args.space)
    else:
        raise PreconditionError("thm2 needs --space (l_1 or l_inf) or --factorization")
    rep = extract_witness(fact, args.n, args.eps, c=args.c, budget=args.budget)
    _emit_report(args, report_to_json(rep))
    return 0


def _demo_coloring(name: str, seed: int):
    if name == "constant":
        return lambda s: 0
    if name == "pentagon":
        # edges of the 5-cycle vs its complement (the pentagram)
        return lambda s: int((s[-1] - s[0]) % 5 in (1, 4))
    rng = np.random.default_rng(seed)
    table = {}

    def color(s):
        if s not in table:
            table[s] = int(rng.integers(2))
        return table[s]
    return color


def cmd_ramsey(args) -> int:
    if args.action == "tower":
        t = tower(args.g, args.m)
        report = {"g": args.g, "m": args.m, "value": str(t), "exact": t.is_exact}
    elif args.action == "bound":
        t = ramsey_upper(args.k, args.l, args.r, args.c)
        report = {"k": args.k, "l": args.l, "r": args.r, "c": args.c, "bound": str(t)}
    elif args.action == "nbound":
        b = theorem2_N_bound(args.n, args.sigma, args.eps, args.c)
        report = {"n": args.n, "sigma": args.sigma, "eps": args.eps, "c": args.c, "m": b.m,
                  "inner": str(b.inner), "outer": str(b.outer),
                  "collapsed": str(b.collapsed), "expression": b.expression}
    else:
        # pre-evaluate random colorings in a fixed order for determinism
        color = _demo_coloring(args.coloring, args.seed)
        for s in itertools.combinations(range(1, args.N + 1), args.k):
            color(s)
        res = monochromatic_search(args.N, args.k, color, args.target, args.budget)
        report = {"N": args.N, "k": args.k, "target": args.target, "coloring": args.coloring,
                  "found": res is not None,
                  "subset": list(res.subset) if res else None,
                  "color": res.color if res else None}
    _emit_report(args, report)
    return 0


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="superreflex", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt="csv"):
        sp.add_argument("--out", help="write primary output here instead of stdout")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=TOL_ALG)

    jn = sub.add_parser("jn", help="J_n bounds from witness search and grid certification")
    jn.add_argument("--space", type=_space, required=True)
    jn.add_argument("--n", type=parse_range, required=True)
    jn.add_argument("--restarts", type=int, default=8)
    jn.add_argument("--iters", type=int, default=200)
    jn.add_argument("--certify", action="store_true")
    jn.add_argument("--step", type=float, default=0.02)
    jn.add_argument("--budget", type=float, default=5e9)
    common(jn)
    jn.set_defaults(func=cmd_jn)

    sn = sub.add_parser("sn", help="S_n upper bounds from factorization search")
    sn.add_argument("--space", type=_space, required=True)
    sn.add_argument("--n", type=parse_range, required=True)
    sn.add_argument("--restarts", type=int, default=4)
    sn.add_argument("--iters", type=int, default=500)
    common(sn)
    sn.set_defaults(func=cmd_sn)

    t1 = sub.add_parser("thm1", help="witness -> factorization")
    t1.add_argument("--n", type=int, default=2)
    t1.add_argument("--eps", type=float, default=0.0,
                    help="perturbation of the l_inf witness (0: exact witness)")
    t1.add_argument("--witness", help="witness JSON file")
    common(t1, "json")
    t1.set_defaults(func=cmd_thm1)

    t2 = sub.add_parser("thm2", help="factorization -> witness")
    t2.add_argument("--space", type=_space, help="l_1 or l_inf space for the canonical factorization")
    t2.add_argument("--factorization", help="factorization JSON file")
    t2.add_argument("--n", type=int, default=2)
    t2.add_argument("--eps", type=float, default=0.5)
    t2.add_argument("--c", type=int, default=2)
    t2.add_argument("--budget", type=int, default=10 ** 7)
    common(t2, "json")
    t2.set_defaults(func=cmd_thm2)

    ra = sub.add_parser("ramsey", help="tower values, Ramsey bounds, search demos")
    rsub = ra.add_subparsers(dest="action", required=True, parser_class=_Parser)
    tw = rsub.add_parser("tower")
    tw.add_argument("--g", type=int, required=True)
    tw.add_argument("--m", type=int, required=True)
    bd = rsub.add_parser("bound")
    bd.add_argument("--k", type=int, required=True)
    bd.add_argument("--l", type=int, required=True)
    bd.add_argument("--r", type=int, default=2)
    bd.add_argument("--c", type=int, default=2)
    nb = rsub.add_parser("nbound")
    nb.add_argument("--n", type=int, required=True)
    nb.add_argument("--sigma", type=float, default=1.0)
    nb.add_argument("--eps", type=float, required=True)
    nb.add_argument("--c", type=int, default=2)
    dm = rsub.add_parser("demo")
    dm.add_argument("--N", type=int, default=6)
    dm.add_argument("--k", type=int, default=2)
    dm.add_argument("--target", type=int, default=3)
    dm.add_argument("--coloring", choices=("constant", "pentagon", "random"), default="random")
    dm.add_argument("--budget", type=int, default=10 ** 6)
    for sp in (tw, bd, nb, dm):
        common(sp, "json")
    ra.set_defaults(func=cmd_ramsey)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
