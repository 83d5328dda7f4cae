"""Inequality check outcomes and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .symcore import ToleranceSpec, eigvalsh

__all__ = [
    "CSV_COLUMNS",
    "InequalityReport",
    "dumps_json",
    "loewner_report",
    "reports_to_csv",
    "reports_to_json",
    "scalar_report",
]

CSV_COLUMNS = ("name", "p", "dim", "N", "M", "seed", "gap", "ratio", "passed")

# Gaps in (-INCONCLUSIVE_FACTOR * tol, -tol] are reported as inconclusive.
INCONCLUSIVE_FACTOR = 10.0


@dataclass
class InequalityReport:
    """Outcome of one inequality check.

    ``gap`` is the smallest eigenvalue of ``c*RHS - LHS`` for Loewner checks
    and ``c*Tr RHS - Tr LHS`` for trace checks. ``ratio`` is
    ``Tr LHS / (c * Tr RHS)`` when the denominator is positive.
    """

    name: str
    gap: float
    tolerance: float
    ratio: float | None = None
    lhs: float | None = None
    rhs: float | None = None
    constant: float = 1.0
    params: dict[str, Any] = field(default_factory=dict)
    trace: list[tuple[int, float]] | None = None

    @property
    def passed(self) -> bool:
        return self.gap >= -self.tolerance

    @property
    def status(self) -> str:
        if self.passed:
            return "pass"
        if self.gap > -INCONCLUSIVE_FACTOR * self.tolerance:
            return "inconclusive"
        return "fail"

    def to_dict(self) -> dict[str, Any]:
        out = {
            "name": self.name,
            "passed": self.passed,
            "status": self.status,
            "gap": self.gap,
            "tolerance": self.tolerance,
            "ratio": self.ratio,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constant": self.constant,
            "params": dict(self.params),
        }
        if self.trace is not None:
            out["trace"] = [[int(n), float(r)] for n, r in self.trace]
        return out


def _ratio(lhs_trace: float, rhs_trace: float, constant: float) -> float | None:
    den = constant * rhs_trace
    return float(lhs_trace / den) if den > 0 else None


def loewner_report(name, lhs, rhs, constant, tol: ToleranceSpec, params) -> InequalityReport:
    """Compare ``lhs <= constant * rhs`` in Loewner order."""
    scaled_rhs = constant * np.asarray(rhs)
    w = eigvalsh(scaled_rhs - lhs)
    radius = float(np.abs(eigvalsh(scaled_rhs)).max())
    lt = float(np.trace(lhs))
    rt = float(np.trace(rhs))
    return InequalityReport(
        name=name,
        gap=float(w[0]),
        tolerance=tol.scaled(radius),
        ratio=_ratio(lt, rt, constant),
        lhs=lt,
        rhs=rt,
        constant=float(constant),
        params=params,
    )


def scalar_report(name, lhs, rhs, constant, tol: ToleranceSpec, params) -> InequalityReport:
    """Compare the real numbers ``lhs <= constant * rhs``."""
    lhs = float(lhs)
    rhs = float(rhs)
    return InequalityReport(
        name=name,
        gap=constant * rhs - lhs,
        tolerance=tol.scaled(abs(constant * rhs)),
        ratio=_ratio(lhs, rhs, constant),
        lhs=lhs,
        rhs=rhs,
        constant=float(constant),
        params=params,
    )


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(x, str):
        return _encode_str(x)
    if isinstance(x, dict):
        items = (f"{_encode_str(str(k))}: {_fmt(v)}" for k, v in x.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _encode_str(s: str) -> str:
    return json.dumps(s)


def dumps_json(obj) -> str:
    """JSON text with floats written at 17 significant digits."""
    return _fmt(obj)


def reports_to_json(reports: Iterable[InequalityReport]) -> str:
    lines = [dumps_json(r.to_dict()) for r in reports]
    if not lines:
        return "[]\n"
    return "[\n  " + ",\n  ".join(lines) + "\n]\n"


def reports_to_csv(reports: Iterable[InequalityReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        row = []
        for col in CSV_COLUMNS:
            if col == "name":
                v = r.name
            elif col == "gap":
                v = r.gap
            elif col == "ratio":
                v = r.ratio
            elif col == "passed":
                v = r.passed
            else:
                v = r.params.get(col)
            if v is None:
                v = ""
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = format(v, ".17g")
            row.append(v)
        writer.writerow(row)
    return buf.getvalue()
