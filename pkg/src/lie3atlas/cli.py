"""Command line entry point ``lie3atlas``.

Subcommands::

    lie3atlas classify SPEC
    lie3atlas compare SPEC_A SPEC_B
    lie3atlas run EXPERIMENT [options]
    lie3atlas table

Exit status is 0 on success, 2 when a verification fails and 1 on usage
errors (bad flags, malformed group specs, inapplicable inputs).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import classify as cl
from . import constructions as cons
from .catalog import format_spec, parse_spec
from .errors import Lie3Error
from .geodesy import DistanceBudget, growth_exponent, growth_type_algebraic
from .invariants import hyperbolicity_delta

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

EXPERIMENTS = ("divergence", "growth", "verify-se2", "cylinder", "se2k-invariance", "covering",
               "n3star", "hyperbolicity")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma separated numbers, got {text!r}") from exc


# -- output ---------------------------------------------------------------------


def _to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        keys = list(rows[0].keys())
        w.writerow(keys)
        for r in rows:
            w.writerow([_cell(r.get(k)) for k in keys])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (dict, list)):
        return json.dumps(v)
    if isinstance(v, bool):
        return str(v).lower()
    return v


def _emit(args, payload, rows=None, csv_text=None):
    """Write JSON (``payload``) or CSV (``rows`` or ``csv_text``) to ``--out`` or stdout."""
    if args.format == "csv":
        text = csv_text if csv_text is not None else _to_csv(rows if rows is not None else [payload])
    else:
        text = json.dumps(payload, indent=None) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands -------------------------------------------------------------------------


def cmd_classify(args) -> int:
    label = cl.classify(parse_spec(args.spec))
    out = label.to_dict()
    if args.format == "csv":
        out = {"group": args.spec, **out}
    _emit(args, out)
    return EXIT_OK


def cmd_compare(args) -> int:
    v = cl.strongest_relation(parse_spec(args.spec_a), parse_spec(args.spec_b))
    _emit(args, v.to_dict(), rows=[{"a": args.spec_a, "b": args.spec_b, **v.to_dict()}])
    return EXIT_OK


def cmd_table(args) -> int:
    m = cl.classification_matrix()
    if args.format == "csv":
        _emit(args, None, csv_text=m.to_csv())
    else:
        _emit(args, json.loads(m.to_json()))
    return EXIT_OK


def _report(args, rep) -> int:
    d = rep.to_dict()
    _emit(args, d)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _run_divergence(args) -> int:
    seps = _floats(args.seps)
    step = args.step if args.step is not None else 0.25
    rows = cons.divergence_experiment(args.lam, seps, seed=args.seed, step=step)
    ok = cons.divergence_passes(rows)
    table = [r.to_dict() for r in rows]
    _emit(args, {"name": "divergence", "lambda": args.lam, "pass": ok, "rows": table,
                 "seed": args.seed}, rows=table)
    return EXIT_OK if ok else EXIT_FAIL


def _run_growth(args) -> int:
    spec = parse_spec(args.group)
    radii = _floats(args.radii)
    samples = args.samples or 200000
    rep = growth_exponent(spec, None, radii, samples=samples, seed=args.seed)
    alg = growth_type_algebraic(spec)
    match = rep.classification == alg
    payload = json.loads(rep.to_json())
    payload.update(group=format_spec(spec), algebraic=str(alg), matches_algebraic=match)
    rows = [{"radius": r, "volume": v, "stderr": e}
            for r, v, e in zip(rep.radii, rep.volumes, rep.stderr)]
    _emit(args, payload, rows=rows)
    return EXIT_OK if match else EXIT_FAIL


def _run_hyperbolicity(args) -> int:
    spec = parse_spec(args.group)
    samples = args.samples or 16
    budget = DistanceBudget(symmetric=False, keep=1)
    rows = []
    for s in _floats(args.scales):
        r = hyperbolicity_delta(spec, None, s, samples=samples, seed=args.seed, budget=budget)
        rows.append({"scale": r.scale, "delta": r.delta_estimate, "samples": r.samples,
                     "max_distance": r.max_distance, "errors": r.errors})
    _emit(args, {"name": "hyperbolicity", "group": format_spec(spec), "rows": rows,
                 "seed": args.seed}, rows=rows)
    return EXIT_OK


def _run_n3star(args) -> int:
    samples = args.samples or 64
    rows = []
    for box in (args.box, 2 * args.box):
        _, rep = cons.n3star_qi_report(samples, box, args.seed)
        rows.append(rep.to_dict())
    a, b = rows[0]["L"] + rows[0]["C"], rows[1]["L"] + rows[1]["C"]
    stable = abs(b - a) <= 0.2 * a
    _emit(args, {"name": "n3star-qi", "pass": stable, "rows": rows, "seed": args.seed}, rows=rows)
    return EXIT_OK if stable else EXIT_FAIL


def cmd_run(args) -> int:
    exp = args.experiment
    tol = args.tol
    n = args.samples
    if exp == "divergence":
        return _run_divergence(args)
    if exp == "growth":
        return _run_growth(args)
    if exp == "hyperbolicity":
        return _run_hyperbolicity(args)
    if exp == "n3star":
        return _run_n3star(args)
    if exp == "verify-se2":
        return _report(args, cons.verify_se2_left_invariance(n or 1000, args.seed, tol or 1e-12))
    if exp == "cylinder":
        return _report(args, cons.verify_cylinder_isometry(args.k, n or 1000, args.seed, tol or 1e-12))
    if exp == "se2k-invariance":
        return _report(args, cons.verify_eq4_left_invariance(args.k, n or 1000, args.seed, tol or 1e-12))
    if exp == "covering":
        return _report(args, cons.verify_covering_local_isometry(
            args.total, args.base, None, n or 200, args.seed, tol or 1e-8))
    raise UsageError(f"unknown experiment {exp!r}")


# -- parser ---------------------------------------------------------------------------------


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--tol", type=float, default=None,
                   help="pass threshold for verifications (default 1e-12, covering 1e-8)")
    p.add_argument("--samples", type=int, default=None,
                   help="sample count (default depends on the experiment)")
    p.add_argument("--step", type=float, default=None,
                   help="sample spacing along quasi-geodesics (default 0.25)")
    p.add_argument("--out", default=None, help="write output to this file instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lie3atlas", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="class label of a group")
    p.add_argument("spec")
    _common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("compare", help="strongest relation between two groups")
    p.add_argument("spec_a")
    p.add_argument("spec_b")
    _common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("table", help="relation matrix of all representatives")
    _common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("run", help="run an experiment", description="experiments: " + ", ".join(EXPERIMENTS))
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--lambda", dest="lam", type=float, default=-1.0, help="D_lambda parameter (divergence)")
    p.add_argument("--seps", default="10,100,1000,10000", help="separations (divergence)")
    p.add_argument("--group", default="N3", help="group spec (growth, hyperbolicity)")
    p.add_argument("--radii", default="2,4,6,8,12,16,20", help="radii (growth)")
    p.add_argument("--scales", default="4,8,16", help="scales (hyperbolicity)")
    p.add_argument("--k", type=int, default=1, help="SE(2)_k index (cylinder, se2k-invariance)")
    p.add_argument("--total", default="N3", help="covering space (covering)")
    p.add_argument("--base", default="N3*", help="base of the covering (covering)")
    p.add_argument("--box", type=float, default=4.0, help="half-width of the sampling box (n3star)")
    _common(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            return args.func(args)
    except (UsageError, Lie3Error, ValueError) as exc:
        sys.stderr.write(f"lie3atlas: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
