"""Command-line entry point: ``opineq {verify,probe,tg,lemma} ...``.

Exit status is 0 when every requested check passes (or every probe
completes), 1 when any inequality check fails, and 2 on usage, input or
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import probe as probes
from .means import StrictPositivityError, tg_limit, tg_logexp
from .reports import InequalityReport, dumps_json, reports_to_csv, reports_to_json
from .sequence import OperatorSequence
from .stepfun import (
    StepOperatorFunction,
    check_lemma_convexity,
    check_lemma_tracial,
    check_theorem_continuous,
)
from .symcore import DomainError, ToleranceSpec
from .verify import (
    SUITES,
    TGMode,
    check_carleman,
    check_discrete_hardy,
    check_phi_bound,
    check_tracial_hardy,
    run_suite,
    summarize,
)

__all__ = [
    "InputError",
    "dump_sequence",
    "dump_step_function",
    "load_sequence",
    "load_step_function",
    "main",
]

ASYMMETRY_TOL = 1e-9


class InputError(ValueError):
    """Malformed input data or configuration."""


class _UsageError(Exception):
    pass


# data files


def _read_json(path) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _matrices(rows, dim, what: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise InputError(f"'{what}' must be a non-empty list of row-major matrices")
    out = np.empty((len(rows), dim, dim))
    for k, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim * dim:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise InputError(f"{what}[{k}]: expected {dim * dim} numbers, got {got}")
        try:
            m = np.array(row, dtype=np.float64).reshape(dim, dim)
        except (TypeError, ValueError):
            raise InputError(f"{what}[{k}]: entries must be numbers") from None
        if not np.all(np.isfinite(m)):
            raise InputError(f"{what}[{k}]: entries must be finite")
        asym = float(np.abs(m - m.T).max())
        if asym > ASYMMETRY_TOL * max(1.0, float(np.abs(m).max())):
            raise InputError(f"{what}[{k}]: not symmetric (max |A - A^T| = {asym:.3e})")
        out[k] = m
    return out


def _dim(doc, key, rows) -> int:
    d = doc.get("dim")
    if d is None:
        n = len(rows[0]) if isinstance(rows, list) and rows and isinstance(rows[0], list) else 0
        d = math.isqrt(n)
        if d < 1 or d * d != n:
            raise InputError(f"cannot infer 'dim' from {key}[0]")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise InputError(f"'dim' must be a positive integer, got {d!r}")
    return d


def load_sequence(path) -> OperatorSequence:
    """Read ``{"dim": d, "terms": [[row-major d*d numbers], ...]}``."""
    doc = _read_json(path)
    if not isinstance(doc, dict) or "terms" not in doc:
        raise InputError(f"{path}: expected an object with 'dim' and 'terms'")
    terms = _matrices(doc["terms"], _dim(doc, "terms", doc["terms"]), "terms")
    try:
        return OperatorSequence(terms)
    except DomainError as exc:
        raise InputError(f"{path}: {exc}") from None


def dump_sequence(a: OperatorSequence, path) -> None:
    doc = {"dim": a.dim, "terms": [t.ravel().tolist() for t in a.terms]}
    Path(path).write_text(dumps_json(doc) + "\n")


def load_step_function(path) -> StepOperatorFunction:
    """Read ``{"breakpoints": [x_0..x_m], "values": [[row-major d*d], ...]}``."""
    doc = _read_json(path)
    if not isinstance(doc, dict) or "breakpoints" not in doc or "values" not in doc:
        raise InputError(f"{path}: expected an object with 'breakpoints' and 'values'")
    values = _matrices(doc["values"], _dim(doc, "values", doc["values"]), "values")
    try:
        return StepOperatorFunction(np.asarray(doc["breakpoints"], dtype=np.float64), values)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def dump_step_function(g: StepOperatorFunction, path) -> None:
    doc = {
        "dim": g.dim,
        "breakpoints": g.breakpoints.tolist(),
        "values": [v.ravel().tolist() for v in g.values],
    }
    Path(path).write_text(dumps_json(doc) + "\n")


# configuration

_LIST_INT = ("dims",)
_LIST_FLOAT = ("p",)
_INT = ("seed", "trials", "M", "N", "budget")
_FLOAT = ("tol",)
_STR = ("suite", "out", "format", "input", "kind", "checkers")


def _apply_config(args: argparse.Namespace, path: str) -> None:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    for key, value in doc.items():
        field = key.replace("-", "_")
        if field in _LIST_INT:
            ok = isinstance(value, list) and all(
                isinstance(v, int) and not isinstance(v, bool) for v in value
            )
            want = "a list of integers"
        elif field in _LIST_FLOAT:
            ok = isinstance(value, list) and all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
            )
            want = "a list of numbers"
            value = [float(v) for v in value] if ok else value
        elif field in _INT:
            ok = isinstance(value, int) and not isinstance(value, bool)
            want = "an integer"
        elif field in _FLOAT:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            want = "a number"
        elif field in _STR:
            ok = isinstance(value, str)
            want = "a string"
        else:
            raise InputError(f"{path}: unknown field '{key}'")
        if not ok:
            raise InputError(f"{path}: field '{key}' must be {want}, got {value!r}")
        if not hasattr(args, field):
            raise InputError(f"{path}: field '{key}' does not apply to '{args.command}'")
        setattr(args, field, value)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opineq",
        description="Numerical checks of operator Hardy and Carleman inequalities.",
    )
    sub = parser.add_subparsers(dest="command", metavar="{verify,probe,tg,lemma}")

    def common(p, tol_default):
        p.add_argument("--config", help="JSON file whose fields override the flags")
        p.add_argument("--seed", type=int, default=None, help="root seed")
        p.add_argument("--tol", type=float, default=tol_default, help="relative tolerance")
        p.add_argument("--out", help="write the report here")
        p.add_argument("--format", choices=("json", "csv"), default=None)

    v = sub.add_parser("verify", help="run a randomized suite or check one sequence")
    common(v, None)
    v.add_argument("--suite", default="default", help=f"one of: {', '.join(SUITES)}")
    v.add_argument("--checkers", help="comma-separated subset of the suite's checkers")
    v.add_argument("--dims", type=_int_list)
    v.add_argument("--p", type=_float_list, help="comma-separated p grid")
    v.add_argument("--trials", type=int)
    v.add_argument("--M", type=int, help="truncation length (default 2N)")
    v.add_argument("--input", help="sequence JSON to check instead of a suite")

    pr = sub.add_parser("probe", help="sharpness probes and the p > 2 violation search")
    common(pr, 1e-6)
    pr.add_argument(
        "--kind", default="extremal", choices=("extremal", "optimize", "violation", "carleman")
    )
    pr.add_argument("--p", type=_float_list)
    pr.add_argument("--dims", type=_int_list)
    pr.add_argument("--N", type=int)
    pr.add_argument("--trials", type=int, help="optimizer budget or search trials")

    tg = sub.add_parser("tg", help="tracial geometric mean of a tuple")
    common(tg, None)
    tg.add_argument("--input", required=False, help="tuple JSON (same schema as sequences)")

    le = sub.add_parser("lemma", help="continuous lemmas and theorems on step functions")
    common(le, None)
    le.add_argument("--input", help="step function JSON; omit for a random suite")
    le.add_argument("--p", type=_float_list)
    le.add_argument("--dims", type=_int_list)
    le.add_argument("--trials", type=int)
    return parser


# commands


def _write(reports: list[InequalityReport], args) -> None:
    if not args.out:
        return
    fmt = args.format or ("csv" if str(args.out).endswith(".csv") else "json")
    text = reports_to_csv(reports) if fmt == "csv" else reports_to_json(reports)
    Path(args.out).write_text(text)


def _fmt(x) -> str:
    return "n/a" if x is None or not math.isfinite(x) else f"{x:.6g}"


def _print_summary(reports: list[InequalityReport]) -> None:
    total = summarize(reports)
    for name, s in total.items():
        print(
            f"{name}: {s.count} checks, {s.passed} passed, {s.inconclusive} inconclusive, "
            f"{s.failed} failed, worst gap {_fmt(s.worst_gap)}, best ratio {_fmt(s.best_ratio)}"
        )
    failed = sum(not r.passed for r in reports)
    print(f"total: {len(reports)} checks, {len(reports) - failed} passed, {failed} not passed")


def _finish(reports, args) -> int:
    _write(reports, args)
    _print_summary(reports)
    return 0 if all(r.passed for r in reports) else 1


def _cmd_verify(args) -> int:
    if args.input:
        a = load_sequence(args.input)
        tol = ToleranceSpec(1e-8 if args.tol is None else args.tol)
        reports = []
        for p in args.p or [2.0]:
            if 1 < p <= 2:
                reports.append(check_discrete_hardy(a, p, tol, args.M))
                reports.append(check_phi_bound(a, p, tol, args.M))
            if p > 1:
                reports.append(check_tracial_hardy(a, p, tol, args.M))
            else:
                raise _UsageError(f"p must be > 1, got {p}")
        reports.append(check_carleman(a, tol, TGMode.LIMIT))
        return _finish(reports, args)
    return _finish(run_suite(_suite(args)), args)


def _suite(args, default="default"):
    name = getattr(args, "suite", None) or default
    if name not in SUITES:
        raise _UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    spec = SUITES[name]
    checkers = getattr(args, "checkers", None)
    if checkers:
        chosen = tuple(c.strip() for c in checkers.split(",") if c.strip())
        spec = replace(spec, checkers=chosen)
    if getattr(args, "M", None) is not None:
        if args.M < spec.max_len:
            raise _UsageError(f"--M {args.M} is shorter than the longest sequence ({spec.max_len})")
        spec = replace(spec, m_fixed=args.M)
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "dims": tuple(args.dims) if args.dims else None,
        "p_grid": tuple(args.p) if args.p else None,
        "tol": args.tol,
    }
    try:
        return replace(spec, **{k: v for k, v in overrides.items() if v is not None})
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _cmd_probe(args) -> int:
    rng = np.random.default_rng(args.seed or 0)
    ps = args.p or [2.0]
    reports = []
    if args.kind == "carleman":
        res = probes.carleman_constant_probe()
        reports.append(res.to_report("carleman_constant_probe", args.tol))
        for n, r in res.trace:
            print(f"N={n}: ratio {r:.15g} (ratio/e {r / math.e:.15g})")
    elif args.kind == "violation":
        dim = (args.dims or [2])[0]
        for p in ps:
            if not p > 2:
                raise _UsageError(f"the violation search needs p > 2, got {p}")
            res = probes.search_loewner_violation(
                p, dim, args.N or 2, 20 if args.trials is None else args.trials, rng
            )
            rep = res.to_report()
            # the search is exploratory: a candidate is evidence, not a failed check
            rep.tolerance = math.inf
            reports.append(rep)
            verdict = "candidate found" if res.found else "no candidate"
            print(f"p={p:g}: {verdict} after {res.samples} samples, "
                  f"smallest relative gap {_fmt(res.min_relative_gap)}, spurious {res.spurious}")
    else:
        for p in ps:
            if not p > 1:
                raise _UsageError(f"p must be > 1, got {p}")
            if args.kind == "extremal":
                res = probes.extremal_family_ratio(p, args.N or 100_000)
            else:
                res = probes.sharpness_optimize(
                    p, (args.dims or [1])[0], args.N or 16,
                    200 if args.trials is None else args.trials, rng,
                )
            reports.append(res.to_report(f"probe_{args.kind}", args.tol))
            for n, r in res.trace:
                print(f"p={p:g} N={n}: ratio {r:.15g} (constant {res.target_constant:.15g})")
    return _finish(reports, args)


def _cmd_tg(args) -> int:
    if not args.input:
        raise _UsageError("tg needs --input")
    a = load_sequence(args.input).terms
    lim = tg_limit(a)
    try:
        logexp = tg_logexp(a)
    except StrictPositivityError:
        logexp = None
    print(f"limit  {lim.value:.15g}" + ("" if lim.converged else " (not converged)"))
    print("logexp " + ("undefined" if logexp is None else f"{logexp:.15g}"))
    if args.out:
        doc = {
            "limit": lim.value,
            "exponent": lim.exponent,
            "converged": lim.converged,
            "logexp": logexp,
        }
        Path(args.out).write_text(dumps_json(doc) + "\n")
    return 0


def _cmd_lemma(args) -> int:
    if not args.input:
        return _finish(run_suite(_suite(args, "continuous")), args)
    g = load_step_function(args.input)
    tol = ToleranceSpec(1e-9 if args.tol is None else args.tol)
    reports = []
    for p in args.p or [2.0]:
        if not p >= 1:
            raise _UsageError(f"p must be >= 1, got {p}")
        if p <= 2:
            reports.append(check_lemma_convexity(g, p, tol))
        reports.append(check_lemma_tracial(g, p, tol))
        if 1 < p <= 2:
            reports.append(check_theorem_continuous(g, p, tol))
        if p > 1:
            reports.append(check_theorem_continuous(g, p, tol, tracial=True))
    return _finish(reports, args)


COMMANDS = {"verify": _cmd_verify, "probe": _cmd_probe, "tg": _cmd_tg, "lemma": _cmd_lemma}


def main(argv=None) -> int:
    parser = _parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.config:
            _apply_config(args, args.config)
        if getattr(args, "trials", None) is not None and args.trials < 0:
            raise _UsageError(f"trials must be >= 0, got {args.trials}")
        if args.tol is not None and not args.tol >= 0:
            raise _UsageError(f"tol must be >= 0, got {args.tol}")
        return COMMANDS[args.command](args)
    except (InputError, _UsageError) as exc:
        print(f"opineq: error: {exc}", file=sys.stderr)
        return 2
