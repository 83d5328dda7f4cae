"""Numerical probes of the sharp constants and an out-of-range violation search.

Nothing here proves anything. The extremal family and the optimizer give
lower bounds on the best constant, and the violation search reports
candidates or the statistics of an unsuccessful search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .means import prefix_tg_logexp
from .reports import InequalityReport
from .sequence import OperatorSequence, hardy_transform, power_sum, truncate_extend
from .stepfun import hardy_constant
from .symcore import ToleranceSpec, eigvalsh, power, random_psd, sym, trace

__all__ = [
    "ProbeResult",
    "ViolationSearch",
    "carleman_constant_probe",
    "extremal_family_ratio",
    "hardy_trace_ratio",
    "search_loewner_violation",
    "sharpness_optimize",
]

EXTREMAL_GRID = (100, 1_000, 10_000, 100_000)
CARLEMAN_GRID = (1, 10, 100, 1_000, 10_000)
# a trial keeps descending until its relative gap is this deep
DEEP_GAP = -1e-4


@dataclass
class ProbeResult:
    target_constant: float
    best_ratio: float
    achiever: Any
    iterations: int
    converged: bool
    trace: list[tuple[int, float]] = field(default_factory=list)
    params: dict[str, Any] = field(default_factory=dict)

    def to_report(self, name: str, tol: float = 1e-6) -> InequalityReport:
        """The probe as ``best_ratio <= target_constant`` on the report channel."""
        return InequalityReport(
            name=name,
            gap=self.target_constant - self.best_ratio,
            tolerance=tol,
            ratio=self.best_ratio / self.target_constant,
            lhs=self.best_ratio,
            rhs=1.0,
            constant=self.target_constant,
            params={**self.params, "iterations": self.iterations, "converged": self.converged},
            trace=list(self.trace),
        )


def hardy_trace_ratio(a: OperatorSequence, p: float, m: int) -> float:
    """``Tr sum_{n<=m} h(a)_n^p / Tr sum_n a_n^p`` (no constant)."""
    lhs = trace(power_sum(hardy_transform(truncate_extend(a, m)), p))
    rhs = trace(power_sum(a, p))
    return lhs / rhs


def _extremal(p: float, n: int) -> OperatorSequence:
    return OperatorSequence.from_scalars(np.arange(1, n + 1, dtype=np.float64) ** (-1.0 / p))


def extremal_family_ratio(p: float, N: int, grid=EXTREMAL_GRID) -> ProbeResult:
    """Hardy ratio of the scalar family ``a_n = n^(-1/p)``, ``n <= N``, at ``M = 4N``.

    The trace holds the same ratio at each ``N`` of ``grid``.
    """
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    ratio = hardy_trace_ratio(_extremal(p, N), p, 4 * N)
    trace_ = [(int(n), hardy_trace_ratio(_extremal(p, n), p, 4 * n)) for n in grid]
    return ProbeResult(
        target_constant=hardy_constant(p),
        best_ratio=ratio,
        achiever="a_n = n^(-1/p)",
        iterations=len(grid),
        converged=True,
        trace=trace_,
        params={"p": float(p), "N": int(N), "M": 4 * int(N), "dim": 1},
    )


def _cayley(s: np.ndarray) -> np.ndarray:
    """Orthogonal ``(I - S)^-1 (I + S)`` for a stack of skew matrices."""
    eye = np.eye(s.shape[-1])
    return np.linalg.solve(eye - s, eye + s)


class _Family:
    """``a_n = c_n Q_n B Q_n^T`` with ``log c_n`` and rotation angles as coordinates."""

    def __init__(self, p, dim, n, m, b, rotations):
        self.p, self.dim, self.n, self.m, self.b = p, dim, n, m, b
        self.iu = np.triu_indices(dim, 1)
        self.n_rot = len(self.iu[0]) if rotations else 0

    def seed(self) -> np.ndarray:
        logc = -np.log(np.arange(1, self.n + 1)) / self.p
        return np.concatenate([logc, np.zeros(self.n * self.n_rot)])

    def sequence(self, x: np.ndarray) -> OperatorSequence:
        c = np.exp(x[: self.n] - x[: self.n].max())
        terms = c[:, None, None] * self.b[None]
        if self.n_rot:
            s = np.zeros((self.n, self.dim, self.dim))
            s[:, self.iu[0], self.iu[1]] = x[self.n :].reshape(self.n, self.n_rot)
            q = _cayley(s - np.swapaxes(s, -1, -2))
            terms = q @ terms @ np.swapaxes(q, -1, -2)
        return OperatorSequence(terms, validate=False)

    def ratio(self, x: np.ndarray) -> float:
        return hardy_trace_ratio(self.sequence(x), self.p, self.m)


def _climb(family: _Family, x0, f0, budget, rng):
    """Random-coordinate perturbation with a step size adapted by success."""
    x, fx = x0.copy(), f0
    step = 0.5
    used = 0
    while used < budget and step > 1e-6:
        i = int(rng.integers(x.size))
        y = x.copy()
        y[i] += step * rng.standard_normal()
        fy = family.ratio(y)
        used += 1
        if fy > fx:
            x, fx = y, fy
            step *= 1.5
        else:
            step *= 0.9
    return x, fx, used, step <= 1e-6


def sharpness_optimize(
    p: float,
    dim: int,
    N: int,
    budget: int,
    rng=None,
    restarts: int = 16,
    rotations: bool = False,
    tracial: bool | None = None,
) -> ProbeResult:
    """Derivative-free ascent of the Hardy trace ratio from the extremal family.

    ``budget`` counts ratio evaluations shared across ``restarts``. Restart 0
    starts from the extremal profile, the others from random perturbations of
    it; each restart has its own child seed. ``tracial`` defaults to
    ``p > 2`` and only labels the result, since the objective is the trace
    ratio either way.
    """
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    if dim < 1 or N < 1 or budget < 0 or restarts < 1:
        raise ValueError("need dim >= 1, N >= 1, budget >= 0, restarts >= 1")
    tracial = p > 2 if tracial is None else bool(tracial)
    if not tracial and p > 2:
        raise ValueError(f"the Loewner target needs 1 < p <= 2, got {p}; pass tracial=True")
    rng = np.random.default_rng(rng)
    b = random_psd(dim, dim, rng)
    b = b / np.trace(b)
    family = _Family(p, dim, N, 4 * N, b, rotations and dim > 1)
    x0 = family.seed()
    f0 = family.ratio(x0)
    best_x, best_f, used, converged = x0, f0, 0, False
    children = np.random.SeedSequence(int(rng.integers(2**63))).spawn(restarts)
    shares = [budget // restarts + (1 if r < budget % restarts else 0) for r in range(restarts)]
    for r, (child, share) in enumerate(zip(children, shares)):
        if share == 0:
            continue
        crng = np.random.default_rng(child)
        if r == 0:
            start, fs = x0, f0
        else:
            # evaluating the perturbed start spends one unit of the share
            start = x0 + 0.3 * crng.standard_normal(x0.size)
            fs = family.ratio(start)
            share -= 1
            used += 1
        x, fx, n_used, conv = _climb(family, start, fs, share, crng)
        used += n_used
        if fx > best_f:
            best_x, best_f, converged = x, fx, conv
    return ProbeResult(
        target_constant=hardy_constant(p),
        best_ratio=float(best_f),
        achiever=family.sequence(best_x),
        iterations=used,
        converged=converged,
        trace=[(int(N), float(f0)), (int(N), float(best_f))],
        params={
            "p": float(p),
            "dim": int(dim),
            "N": int(N),
            "M": 4 * int(N),
            "tracial": tracial,
            "seed_ratio": float(f0),
        },
    )


@dataclass
class ViolationSearch:
    """Outcome of a search for ``sum h(a)_n^p <= C sum a_n^p`` failing at ``p > 2``.

    ``relative_gap`` is the smallest eigenvalue of ``C*RHS - LHS`` over the
    spectral radius of ``C*RHS``. A candidate is kept only if it survives
    re-evaluation at ten times tighter tolerance and, for integer ``p``,
    with exact repeated-multiplication powers.
    """

    p: float
    found: bool
    samples: int
    min_relative_gap: float
    spurious: int
    sequence: OperatorSequence | None = None
    gap: float | None = None
    exact_gap: float | None = None

    def to_report(self) -> InequalityReport:
        params = {
            "p": self.p,
            "samples": self.samples,
            "spurious": self.spurious,
            "found": self.found,
        }
        if self.sequence is not None:
            params.update(dim=self.sequence.dim, N=len(self.sequence))
        gap = self.gap if self.found else self.min_relative_gap
        return InequalityReport(
            name="loewner_violation_search",
            gap=gap if math.isfinite(gap) else 0.0,
            tolerance=0.0,
            params=params,
        )


def _loewner_gap(terms: np.ndarray, p: float, m: int, exact: bool = False):
    """``(gap, scale)`` for ``C sum a_n^p - sum_{n<=m} h(a)_n^p``."""
    c = hardy_constant(p)
    n, d, _ = terms.shape
    padded = np.concatenate([terms, np.zeros((m - n, d, d))])
    avg = np.cumsum(padded, axis=0) / np.arange(1, m + 1)[:, None, None]
    if exact:
        k = int(p)
        lhs = sum(np.linalg.matrix_power(x, k) for x in avg)
        rhs = sum(np.linalg.matrix_power(x, k) for x in terms)
    else:
        lhs = power(avg, p).sum(axis=0)
        rhs = power(terms, p).sum(axis=0)
    diff = sym(c * rhs - lhs)
    scale = float(np.abs(eigvalsh(c * rhs)).max())
    return float(eigvalsh(diff)[0]), scale


def search_loewner_violation(
    p: float,
    dim: int,
    N: int,
    trials: int,
    rng=None,
    tol: ToleranceSpec = ToleranceSpec(1e-9),
    steps: int = 200,
    M: int | None = None,
) -> ViolationSearch:
    """Hill-climb the smallest eigenvalue of ``C*RHS - LHS`` for ``p > 2``.

    Each trial starts from a random sequence ``a_k = G_k^T G_k`` and perturbs
    one ``G_k`` at a time, keeping changes that lower the relative gap, until
    the gap is below ``DEEP_GAP`` or ``steps`` run out. The first trial ending
    below ``-10 * tol`` whose sequence re-verifies is returned; otherwise the
    result carries the search statistics.
    """
    if not p > 2:
        raise ValueError(
            f"violation search is for p > 2 (got p={p}); "
            "for 1 < p <= 2 the Loewner inequality is a theorem"
        )
    if dim < 1 or N < 1 or trials < 0:
        raise ValueError("need dim >= 1, N >= 1, trials >= 0")
    rng = np.random.default_rng(rng)
    m = 2 * N if M is None else int(M)
    threshold = -10.0 * tol.psd_tol
    best = math.inf
    spurious = 0
    samples = 0

    def rel(g):
        terms = np.swapaxes(g, -1, -2) @ g
        gap, scale = _loewner_gap(terms, p, m)
        return gap / scale if scale > 0 else 0.0

    for _ in range(trials):
        g = rng.standard_normal((N, int(rng.integers(1, dim + 1)), dim))
        f = rel(g)
        samples += 1
        step = 0.3
        for _ in range(steps):
            if f < DEEP_GAP:
                break
            k = int(rng.integers(N))
            h = g.copy()
            h[k] += step * rng.standard_normal(h[k].shape)
            fh = rel(h)
            samples += 1
            if fh < f:
                g, f = h, fh
                step *= 1.3
            else:
                step *= 0.95
        best = min(best, f)
        if f < threshold:
            terms = np.swapaxes(g, -1, -2) @ g
            _, scale = _loewner_gap(terms, p, m)
            terms = terms / scale ** (1.0 / p)
            gap, _ = _loewner_gap(terms, p, m)
            tight = -10.0 * tol.psd_tol / 10.0
            ok = gap < tight
            exact = None
            if float(p).is_integer():
                exact, _ = _loewner_gap(terms, p, m, exact=True)
                ok = ok and exact < -1e-6
            if ok:
                return ViolationSearch(
                    p=float(p),
                    found=True,
                    samples=samples,
                    min_relative_gap=best,
                    spurious=spurious,
                    sequence=OperatorSequence(terms),
                    gap=gap,
                    exact_gap=exact,
                )
            spurious += 1
    return ViolationSearch(
        p=float(p), found=False, samples=samples, min_relative_gap=best, spurious=spurious
    )


def carleman_constant_probe(N_grid=CARLEMAN_GRID) -> ProbeResult:
    """``sum_n TG(a_1..a_n) / sum_n a_n`` for ``a_n = 1/n`` at each ``N`` of the grid.

    The trace holds the raw ratios, which approach ``e`` from below; the
    params carry them normalized by ``e``.
    """
    grid = sorted(int(n) for n in N_grid)
    if not grid or grid[0] < 1:
        raise ValueError("N_grid must be a non-empty list of positive integers")
    n_max = grid[-1]
    a = OperatorSequence.from_scalars(1.0 / np.arange(1, n_max + 1))
    tg = prefix_tg_logexp(a)
    lhs = np.cumsum(tg)
    rhs = np.cumsum(1.0 / np.arange(1, n_max + 1))
    trace_ = [(n, float(lhs[n - 1] / rhs[n - 1])) for n in grid]
    ratios = [r for _, r in trace_]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    return ProbeResult(
        target_constant=math.e,
        best_ratio=max(ratios),
        achiever="a_n = 1/n",
        iterations=len(grid),
        converged=increasing,
        trace=trace_,
        params={"dim": 1, "N": n_max, "normalized": [r / math.e for r in ratios]},
    )
