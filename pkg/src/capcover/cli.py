"""Command-line interface: ``capcover <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .coeffs import (CLOSED, CoeffEntry, CoeffTable, coeff_closed_form, coeff_solve_linear_system,
                     monte_carlo_table)
from .condition import cond_tails, tail_bound_explicit
from .coverage import (expected_caps_bound, expected_caps_series, p_not_covered_bound,
                       p_not_covered_exact)
from .geom import Instance, InstanceError, check_certificate, sic_general, sic_hull, ENUM_CAPACITY
from .mc import (mc_condition_tails, mc_coverage, mc_det_moment, mc_expected_caps,
                 mc_expected_ln_cond)
from .quad import QuadSpec
from .sampling import RNG_ALGORITHM
from .validation import MC_SUITES, SUITES, run_suite

log = logging.getLogger("capcover")


def _count(text: str) -> int:
    """Accept integers written as 100000, 1e5 or 10**5."""
    text = text.strip()
    if "**" in text:
        base, exp = text.split("**")
        return int(base) ** int(exp)
    value = float(text)
    if value != int(value) or value < 0:
        raise argparse.ArgumentTypeError(f"not a count: {text}")
    return int(value)


def _common(p: argparse.ArgumentParser, mc: bool = False):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.add_argument("--rel-tol", type=float, default=1e-12, help="quadrature relative tolerance")
    p.add_argument("--degrees", action="store_true", help="angles are given in degrees")
    if mc:
        p.add_argument("--trials", type=_count, default=100_000)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="capcover",
                                 description="Spherical cap coverage and GCC condition numbers.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="coefficients C(m,k)")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--method", choices=("closed", "system", "mc"), default="system")
    p.add_argument("--dps", type=int, default=40,
                   help="digits for the system route; 0 selects double precision")
    _common(p, mc=True)

    p = sub.add_parser("coverage", help="p(n,m,alpha): exact for alpha >= pi/2, else an upper bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    _common(p)

    p = sub.add_parser("condition", help="conditional tails of the GCC condition number")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--eps", type=float, nargs="+", required=True)
    p.add_argument("--inv-eps", action="store_true", help="--eps values are 1/eps")
    _common(p)

    p = sub.add_parser("gcc", help="smallest including cap and C(A) of an instance file")
    p.add_argument("file", help="CSV (one row per vector) or JSON {m, n, rows}")
    _common(p)

    p = sub.add_parser("expected-caps", help="bounds on E(N(m,alpha))")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--terms", type=int, default=200)
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo estimators")
    p.add_argument("estimator", choices=("coverage", "condition", "expected-caps", "ln-cond",
                                         "det-moment"))
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--inv-eps", action="store_true")
    p.add_argument("--draw-cap", type=int, default=10_000)
    _common(p, mc=True)

    p = sub.add_parser("validate", help="run acceptance suites")
    p.add_argument("suite", choices=sorted(SUITES) + ["all", "fast"])
    p.add_argument("--trials", type=_count, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    return ap


def _angle(args, value):
    return math.radians(value) if args.degrees else value


def _eps_values(args):
    vals = args.eps or []
    return [1.0 / v for v in vals] if args.inv_eps else list(vals)


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out",)}
    cfg["version"] = __version__
    if "seed" in cfg:
        cfg["rng"] = RNG_ALGORITHM
    return cfg


def emit(args, rows: list[dict], out=None) -> str:
    """Render result rows with a config header; CSV headers are '# '-prefixed JSON."""
    cfg = _config(args)
    if args.format == "json":
        text = json.dumps({"config": cfg, "results": rows}, indent=2, default=_jsonable) + "\n"
    else:
        buf = io.StringIO()
        buf.write("# " + json.dumps(cfg, default=_jsonable) + "\n")
        fields: list[str] = []
        for r in rows:
            for k in r:
                if k not in fields:
                    fields.append(k)
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        (out or sys.stdout).write(text)
    return text


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    return str(x)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, default=_jsonable)
    return v


def parse_output(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`emit` (values from CSV come back as strings)."""
    if text.lstrip().startswith("{"):
        obj = json.loads(text)
        return obj["config"], obj["results"]
    lines = text.splitlines()
    cfg = json.loads(lines[0][2:])
    return cfg, list(csv.DictReader(lines[1:]))


def _spec(args) -> QuadSpec:
    return QuadSpec(rel_tol=args.rel_tol)


def cmd_coeffs(args) -> int:
    m = args.m
    if args.method == "closed":
        table = CoeffTable(m)
        rows = []
        for k in range(1, m + 1):
            v = coeff_closed_form(m, k)
            rows.append({"m": m, "k": k, "value": v if v is not None else "not available",
                         "provenance": CLOSED, "uncertainty": 0.0})
            if v is not None:
                table.entries[k] = CoeffEntry(v, CLOSED)
        emit(args, rows)
        return 0
    if args.method == "system":
        table = coeff_solve_linear_system(m, _spec(args), dps=args.dps or None)
        ok = not table.degraded
    else:
        table = monte_carlo_table(m, args.trials, args.seed, args.workers)
        ok = True
    rows = [{"m": m, "k": k, "value": e.value, "provenance": e.provenance,
             "uncertainty": e.uncertainty} for k, e in sorted(table.entries.items())]
    emit(args, rows)
    return 0 if ok else 1


def cmd_coverage(args) -> int:
    alpha = _angle(args, args.alpha)
    if alpha >= 0.5 * math.pi:
        value, kind = p_not_covered_exact(args.n, args.m, alpha, spec=_spec(args)), "exact"
    else:
        value, kind = p_not_covered_bound(args.n, args.m, alpha, spec=_spec(args)), "upper-bound"
    emit(args, [{"n": args.n, "m": args.m, "alpha": alpha, "kind": kind, "value": value}])
    return 0


def cmd_condition(args) -> int:
    rows = []
    for raw, eps in zip(args.eps, _eps_values(args)):
        ct = cond_tails(args.n, args.m, eps, spec=_spec(args))
        # regime thresholds are stated in 1/eps, so pass it through unrounded
        ex = (tail_bound_explicit(args.n, args.m, inv_eps=raw) if args.inv_eps
              else tail_bound_explicit(args.n, args.m, eps=eps))
        rows.append({"n": args.n, "m": args.m, "eps": eps, "feasible_tail": ct.feasible_tail,
                     "infeasible_tail_bound": ct.infeasible_tail_bound, "P_bound": ex.p_bound,
                     "Q_bound": ex.q_bound})
    emit(args, rows)
    return 0


def cmd_gcc(args) -> int:
    try:
        inst = Instance.load(args.file)
    except (InstanceError, ValueError, KeyError) as exc:
        print(f"error: {args.file}: {exc}", file=sys.stderr)
        return 2
    res = sic_general(inst) if inst.n <= ENUM_CAPACITY else sic_hull(inst)
    rep = check_certificate(inst, res)
    row = {"n": inst.n, "m": inst.m, **res.to_dict(), "certificate_ok": rep.ok}
    emit(args, [row])
    for p in rep.problems:
        print(f"certificate: {p}", file=sys.stderr)
    return 0 if rep.ok else 1


def cmd_expected_caps(args) -> int:
    alpha = _angle(args, args.alpha)
    series = expected_caps_series(args.m, alpha, spec=_spec(args), terms=args.terms)
    emit(args, [{"m": args.m, "alpha": alpha, "closed_bound": expected_caps_bound(args.m, alpha),
                 "series_partial": series.partial_sum, "series_tail": series.tail_bound,
                 "series_bound": series.upper}])
    return 0


def cmd_simulate(args) -> int:
    params = {k: getattr(args, k) for k in ("n", "m", "k", "alpha") if getattr(args, k) is not None}
    common = dict(trials=args.trials, seed=args.seed, workers=args.workers)
    est_name = args.estimator
    if est_name in ("coverage", "condition", "ln-cond") and args.n is None:
        raise SystemExit(f"simulate {est_name} needs --n")
    if est_name == "coverage":
        alpha = _angle(args, args.alpha)
        rows = [mc_coverage(args.n, args.m, alpha, **common).to_record("mc_coverage", params)]
    elif est_name == "condition":
        tails = mc_condition_tails(args.n, args.m, _eps_values(args), **common)
        rows = tails.to_records(params)
    elif est_name == "expected-caps":
        alpha = _angle(args, args.alpha)
        est = mc_expected_caps(args.m, alpha, args.trials, args.seed, args.draw_cap, args.workers)
        rows = [est.to_record("mc_expected_caps", params)]
    elif est_name == "ln-cond":
        rows = [mc_expected_ln_cond(args.n, args.m, **common).to_record("mc_expected_ln_cond", params)]
    else:
        if args.k is None:
            raise SystemExit("simulate det-moment needs --k")
        rows = [mc_det_moment(args.m, args.k, **common).to_record("mc_det_moment", params)]
    emit(args, rows)
    return 0


def cmd_validate(args) -> int:
    if args.suite == "all":
        names = list(SUITES)
    elif args.suite == "fast":
        names = [s for s in SUITES if s not in MC_SUITES]
    else:
        names = [args.suite]
    rows = []
    ok = True
    for name in names:
        kwargs = {}
        if name in MC_SUITES:
            kwargs["workers"] = args.workers
            if args.trials is not None:
                kwargs["trials"] = args.trials
            if args.seed is not None:
                kwargs["seed"] = args.seed
        res = run_suite(name, **kwargs)
        print(res.summary(), file=sys.stderr)
        ok &= res.passed
        for c in res.checks:
            rows.append({"suite": name, "check": c.name, "passed": c.passed, "detail": c.detail})
        rows.append({"suite": name, "check": "suite", "passed": res.passed,
                     "detail": f"{res.seconds:.1f}s"})
    emit(args, rows)
    return 0 if ok else 1


COMMANDS = {
    "coeffs": cmd_coeffs,
    "coverage": cmd_coverage,
    "condition": cmd_condition,
    "gcc": cmd_gcc,
    "expected-caps": cmd_expected_caps,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
