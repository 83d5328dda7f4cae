"""Checkers for the discrete Hardy-type inequalities and seeded random suites.

Every checker returns an :class:`InequalityReport`. Suites draw their data
from ``numpy.random.SeedSequence(seed, spawn_key=(checker_index, trial))``,
so each trial's data depends only on the root seed, the checker's position in
the suite and the trial number. Adding trials never changes earlier ones.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .means import phi, prefix_tg_limit, prefix_tg_logexp
from .reports import InequalityReport, loewner_report, scalar_report
from .sequence import OperatorSequence, hardy_transform, power_sum, truncate_extend
from .stepfun import (
    StepOperatorFunction,
    check_lemma_convexity,
    check_lemma_tracial,
    check_theorem_continuous,
    hardy_constant,
)
from .symcore import ToleranceSpec, random_psd, trace

__all__ = [
    "CHECKERS",
    "SUITES",
    "SuiteSpec",
    "TGMode",
    "check_carleman",
    "check_discrete_hardy",
    "check_phi_bound",
    "check_tracial_hardy",
    "random_sequence",
    "random_step_function",
    "run_suite",
    "summarize",
    "trial_rng",
]

HARDY_TOL = ToleranceSpec(1e-8)


class TGMode(enum.Enum):
    LIMIT = "limit"
    LOGEXP = "logexp"


def _truncation(a: OperatorSequence, m: int | None) -> int:
    m = 2 * len(a) if m is None else int(m)
    if m < len(a):
        raise ValueError(f"truncation M={m} is shorter than the sequence (N={len(a)})")
    return m


def _params(a, p, m, **extra):
    return {"p": float(p), "dim": a.dim, "N": len(a), "M": m, **extra}


def check_discrete_hardy(
    a: OperatorSequence, p: float, tol: ToleranceSpec = HARDY_TOL, M: int | None = None
) -> InequalityReport:
    """Loewner check ``sum_{n<=M} h(a)_n^p <= (p/(p-1))^p sum_n a_n^p``.

    ``M`` defaults to ``2N`` so part of the tail ``h(a)_n = S/n`` beyond the
    last term is included.
    """
    if not 1 < p <= 2:
        raise ValueError(
            f"the Loewner-order Hardy inequality needs 1 < p <= 2 (got p={p}); "
            "use check_tracial_hardy for larger p"
        )
    m = _truncation(a, M)
    lhs = power_sum(hardy_transform(truncate_extend(a, m)), p)
    rhs = power_sum(a, p)
    return loewner_report("discrete_hardy", lhs, rhs, hardy_constant(p), tol, _params(a, p, m))


def check_tracial_hardy(
    a: OperatorSequence, p: float, tol: ToleranceSpec = HARDY_TOL, M: int | None = None
) -> InequalityReport:
    """Trace form of the Hardy inequality; any ``p > 1``."""
    if not p > 1:
        raise ValueError(f"tracial Hardy inequality needs p > 1, got {p}")
    m = _truncation(a, M)
    lhs = trace(power_sum(hardy_transform(truncate_extend(a, m)), p))
    rhs = trace(power_sum(a, p))
    return scalar_report("tracial_hardy", lhs, rhs, hardy_constant(p), tol, _params(a, p, m))


def check_phi_bound(
    a: OperatorSequence, p: float, tol: ToleranceSpec = HARDY_TOL, M: int | None = None
) -> InequalityReport:
    """``Phi_p(h(a)) <= p/(p-1) Phi_p(a)`` for ``1 < p <= 2``."""
    if not 1 < p <= 2:
        raise ValueError(f"the Phi_p bound is checked for 1 < p <= 2, got {p}")
    m = _truncation(a, M)
    lhs = phi(hardy_transform(truncate_extend(a, m)), p)
    rhs = phi(a, p)
    return scalar_report("phi_bound", lhs, rhs, p / (p - 1.0), tol, _params(a, p, m))


def check_carleman(
    a: OperatorSequence, tol: ToleranceSpec = HARDY_TOL, tg_mode: TGMode = TGMode.LIMIT
) -> InequalityReport:
    """``sum_n TG(a_1..a_n) <= e sum_n Tr a_n`` over the stored terms.

    ``LOGEXP`` mode needs strictly positive terms. In ``LIMIT`` mode the
    report records whether every prefix limit settled.
    """
    tg_mode = TGMode(tg_mode)
    params = {"dim": a.dim, "N": len(a), "tg_mode": tg_mode.value}
    if tg_mode is TGMode.LOGEXP:
        prefix = prefix_tg_logexp(a)
    else:
        prefix, conv = prefix_tg_limit(a)
        params["converged"] = bool(conv.all())
    lhs = math.fsum(prefix)
    rhs = math.fsum(trace(a.terms))
    return scalar_report(f"carleman_{tg_mode.value}", lhs, rhs, math.e, tol, params)


# random data


def random_sequence(rng, dim: int, n: int, positive: bool = False) -> OperatorSequence:
    """Random PSD sequence with mixed ranks, magnitudes and zero terms.

    With ``positive=True`` every term has smallest eigenvalue at least
    ``1e-2`` times its scale.
    """
    scales = 10.0 ** rng.uniform(-2.0, 2.0, size=n)
    terms = np.empty((n, dim, dim))
    for k in range(n):
        if positive:
            t = random_psd(dim, dim, rng) + 1e-2 * np.eye(dim)
        elif rng.random() < 0.1:
            t = np.zeros((dim, dim))
        else:
            t = random_psd(dim, int(rng.integers(1, dim + 1)), rng)
        terms[k] = scales[k] * t / max(1.0, float(np.trace(t)) / dim)
    return OperatorSequence(terms)


def random_step_function(rng, dim: int, segments: int) -> StepOperatorFunction:
    """Random PSD step function with log-uniform breakpoints in ``[0.05, 20]``."""
    x = np.sort(10.0 ** rng.uniform(-1.3, 1.3, size=segments + 1))
    while np.any(np.diff(x) <= 1e-3 * x[1:]):
        x = np.sort(10.0 ** rng.uniform(-1.3, 1.3, size=segments + 1))
    values = np.array(
        [random_psd(dim, int(rng.integers(1, dim + 1)), rng) for _ in range(segments)]
    )
    return StepOperatorFunction(x, values)


# suites


@dataclass(frozen=True)
class _Checker:
    p_range: tuple[float, float] | None
    run: Callable


def _seq_trial(fn, positive=False):
    def run(rng, dim, n, p, m, tol):
        a = random_sequence(rng, dim, n, positive)
        return fn(a, p, tol, m)

    return run


def _carleman_trial(mode):
    def run(rng, dim, n, p, m, tol):
        return check_carleman(random_sequence(rng, dim, n, positive=True), tol, mode)

    return run


def _step_trial(fn, **kw):
    def run(rng, dim, n, p, m, tol):
        g = random_step_function(rng, min(dim, 4), int(rng.integers(1, 9)))
        return fn(g, p, tol, **kw)

    return run


CHECKERS: dict[str, _Checker] = {
    "discrete_hardy": _Checker((1.0, 2.0), _seq_trial(check_discrete_hardy)),
    "tracial_hardy": _Checker((1.0, 8.0), _seq_trial(check_tracial_hardy)),
    "phi_bound": _Checker((1.0, 2.0), _seq_trial(check_phi_bound)),
    "carleman_limit": _Checker(None, _carleman_trial(TGMode.LIMIT)),
    "carleman_logexp": _Checker(None, _carleman_trial(TGMode.LOGEXP)),
    "lemma_convexity": _Checker((1.0, 2.0), _step_trial(check_lemma_convexity)),
    "lemma_tracial": _Checker((1.0, 8.0), _step_trial(check_lemma_tracial)),
    "theorem_continuous": _Checker((1.0, 2.0), _step_trial(check_theorem_continuous)),
    "theorem_continuous_tracial": _Checker(
        (1.0, 8.0), _step_trial(check_theorem_continuous, tracial=True)
    ),
}


@dataclass(frozen=True)
class SuiteSpec:
    """Which checkers to run, on how many trials, over which dimensions.

    ``p`` is drawn uniformly from each checker's half-open range ``(lo, hi]``
    unless ``p_grid`` is given, in which case trial ``t`` uses
    ``p_grid[t % len(p_grid)]``. Sequence lengths are uniform in
    ``1..max_len``; ``M`` is ``m_fixed`` if set, else ``m_factor * N``.
    """

    checkers: tuple[str, ...] = ()
    trials: int = 0
    dims: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    p_grid: tuple[float, ...] | None = None
    seed: int = 0
    max_len: int = 64
    m_factor: int = 2
    m_fixed: int | None = None
    tol: float = 1e-8

    def __post_init__(self):
        unknown = [c for c in self.checkers if c not in CHECKERS]
        if unknown:
            raise ValueError(f"unknown checker(s): {', '.join(unknown)}")
        if self.trials < 0:
            raise ValueError(f"trials must be >= 0, got {self.trials}")
        if not self.dims or min(self.dims) < 1:
            raise ValueError("dims must be a non-empty list of positive integers")
        if self.max_len < 1 or self.m_factor < 1:
            raise ValueError("max_len and m_factor must be >= 1")
        if self.m_fixed is not None and self.m_fixed < self.max_len:
            raise ValueError(f"M={self.m_fixed} is shorter than max_len={self.max_len}")
        if self.p_grid is not None:
            for name in self.checkers:
                rng_ = CHECKERS[name].p_range
                if rng_ is None:
                    continue
                lo, hi = rng_
                bad = [p for p in self.p_grid if not lo < p <= hi]
                if bad:
                    raise ValueError(f"p={bad[0]} outside ({lo}, {hi}] for checker {name}")


SUITES: dict[str, SuiteSpec] = {
    "default": SuiteSpec(
        checkers=("discrete_hardy", "tracial_hardy", "phi_bound", "carleman_limit"),
        trials=1000,
    ),
    "quick": SuiteSpec(
        checkers=("discrete_hardy", "tracial_hardy", "phi_bound", "carleman_limit"),
        trials=25,
    ),
    "continuous": SuiteSpec(
        checkers=(
            "lemma_convexity",
            "lemma_tracial",
            "theorem_continuous",
            "theorem_continuous_tracial",
        ),
        trials=200,
        dims=(1, 2, 3, 4),
        tol=1e-9,
    ),
}


def trial_rng(seed: int, checker_index: int, trial: int) -> np.random.Generator:
    """Counter-based child generator for one trial."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(checker_index), int(trial)))
    return np.random.default_rng(ss)


def _run_trial(spec: SuiteSpec, index: int, trial: int) -> InequalityReport:
    name = spec.checkers[index]
    checker = CHECKERS[name]
    rng = trial_rng(spec.seed, index, trial)
    dim = int(spec.dims[int(rng.integers(len(spec.dims)))])
    n = int(rng.integers(1, spec.max_len + 1))
    if checker.p_range is None:
        p = None
    elif spec.p_grid is not None:
        p = float(spec.p_grid[trial % len(spec.p_grid)])
    else:
        lo, hi = checker.p_range
        p = hi - (hi - lo) * float(rng.random())
    m = spec.m_fixed if spec.m_fixed is not None else spec.m_factor * n
    report = checker.run(rng, dim, n, p, m, ToleranceSpec(spec.tol))
    report.params = {**report.params, "seed": int(spec.seed), "trial": trial}
    return report


def _run_chunk(args):
    spec, jobs = args
    return [_run_trial(spec, i, t) for i, t in jobs]


def _workers() -> int:
    raw = os.environ.get("OPINEQ_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"OPINEQ_THREADS must be an integer, got {raw!r}") from None


def run_suite(spec: SuiteSpec, workers: int | None = None) -> list[InequalityReport]:
    """Run every trial of ``spec``; reports come back in (checker, trial) order.

    ``workers`` defaults to ``OPINEQ_THREADS`` (1 if unset). The output does
    not depend on the worker count.
    """
    jobs = [(i, t) for i in range(len(spec.checkers)) for t in range(spec.trials)]
    workers = _workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(jobs) < 2:
        return _run_chunk((spec, jobs))
    size = -(-len(jobs) // (4 * workers))
    chunks = [(spec, jobs[k : k + size]) for k in range(0, len(jobs), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, chunks))
    return [r for part in parts for r in part]


@dataclass
class CheckerSummary:
    count: int = 0
    passed: int = 0
    inconclusive: int = 0
    failed: int = 0
    worst_gap: float = math.inf
    worst_relative_gap: float = math.inf
    best_ratio: float | None = None

    def add(self, r: InequalityReport):
        self.count += 1
        status = r.status
        if status == "pass":
            self.passed += 1
        elif status == "inconclusive":
            self.inconclusive += 1
        else:
            self.failed += 1
        self.worst_gap = min(self.worst_gap, r.gap)
        if r.tolerance > 0:
            self.worst_relative_gap = min(self.worst_relative_gap, r.gap / r.tolerance)
        if r.ratio is not None and (self.best_ratio is None or r.ratio > self.best_ratio):
            self.best_ratio = r.ratio


def summarize(reports) -> dict[str, CheckerSummary]:
    """Per-checker counts, smallest gap and largest ratio, in first-seen order."""
    out: dict[str, CheckerSummary] = {}
    for r in reports:
        out.setdefault(r.name, CheckerSummary()).add(r)
    return out

