"""Piecewise-constant PSD-valued functions on (0, inf) and weighted integrals.

A step function takes the value ``v_j`` on ``(x_{j-1}, x_j]`` and vanishes on
``(0, x_0]`` and ``(x_m, inf)``. Integrals of ``g^p`` are exact. Integrals of
the running average ``A(x) = (1/x) int_0^x g`` raised to ``p`` use
Gauss-Legendre nodes on each segment plus an analytic tail beyond ``x_m``,
where ``A(x) = S / x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .reports import InequalityReport, scalar_report, loewner_report
from .symcore import NotPSDError, ToleranceSpec, eigvalsh, power, sym

__all__ = [
    "QuadratureSpec",
    "StepOperatorFunction",
    "Weight",
    "check_lemma_convexity",
    "check_lemma_tracial",
    "check_theorem_continuous",
    "cumulative_average",
    "hardy_constant",
    "integral_avg_power",
    "integral_power",
    "pairwise_sum",
]


class Weight(enum.Enum):
    DX = "dx"
    DX_OVER_X = "dx/x"


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre order and equal subdivisions per segment.

    ``grading`` maps each segment through ``x = x_{j-1} + L u**grading`` before
    subdividing, which smooths the ``(x - x_{j-1})**p`` onset that appears when
    a new direction enters the running average.
    """

    nodes_per_segment: int = 32
    refinement: int = 4
    grading: int = 3

    def __post_init__(self):
        if self.nodes_per_segment < 2:
            raise ValueError("nodes_per_segment must be >= 2")
        if self.refinement < 1 or self.grading < 1:
            raise ValueError("refinement and grading must be >= 1")

    def doubled(self) -> QuadratureSpec:
        return QuadratureSpec(2 * self.nodes_per_segment, self.refinement, self.grading)


@dataclass(frozen=True, eq=False)
class StepOperatorFunction:
    breakpoints: np.ndarray
    values: np.ndarray
    tol: ToleranceSpec = ToleranceSpec()

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=np.float64).ravel()
        v = sym(self.values)
        if v.ndim == 2:
            v = v[None]
        if x.size < 2 or v.shape[0] != x.size - 1:
            raise ValueError(
                f"need m+1 breakpoints for m values, got {x.size} and {v.shape[0]}"
            )
        if not (x[0] > 0 and np.all(np.diff(x) > 0)):
            raise ValueError("breakpoints must be positive and strictly increasing")
        w = eigvalsh(v)
        scale = np.maximum(1.0, np.abs(w).max(axis=-1)) if self.tol.rel_scale else 1.0
        bad = np.flatnonzero(w[:, 0] < -self.tol.psd_tol * scale)
        if bad.size:
            j = int(bad[0])
            raise NotPSDError(f"value {j} is not PSD", float(w[j, 0]))
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, dim: int = 1) -> StepOperatorFunction:
        return cls([1.0, 2.0], np.zeros((1, dim, dim)))

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def prefix_integrals(self) -> np.ndarray:
        """``int_0^{x_j} g`` for ``j = 0..m``; shape ``(m+1, d, d)``."""
        seg = self.values * self.lengths[:, None, None]
        out = np.zeros((len(self.breakpoints), self.dim, self.dim))
        out[1:] = np.cumsum(seg, axis=0)
        return out

    def total(self) -> np.ndarray:
        return self.prefix_integrals()[-1]


def pairwise_sum(stack: np.ndarray) -> np.ndarray:
    """Sum along axis 0 with a fixed balanced binary tree."""
    stack = np.asarray(stack)
    if stack.shape[0] == 0:
        return np.zeros(stack.shape[1:])
    while stack.shape[0] > 1:
        n = stack.shape[0]
        half = n // 2
        head = stack[: 2 * half : 2] + stack[1 : 2 * half : 2]
        stack = np.concatenate([head, stack[2 * half :]]) if n % 2 else head
    return stack[0]


def cumulative_average(g: StepOperatorFunction, x) -> np.ndarray:
    """``(1/x) int_0^x g(t) dt``, exact; ``x`` may be a scalar or an array."""
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs <= 0):
        raise ValueError("x must be positive")
    flat = xs.ravel()
    bp = g.breakpoints
    pre = g.prefix_integrals()
    m = len(g.values)
    j = np.clip(np.searchsorted(bp, flat, side="left"), 1, m)
    inside = (flat > bp[0]) & (flat <= bp[-1])
    partial = (flat - bp[j - 1])[:, None, None] * g.values[j - 1]
    integ = np.where(inside[:, None, None], pre[j - 1] + partial, 0.0)
    integ = np.where((flat > bp[-1])[:, None, None], pre[-1], integ)
    out = integ / flat[:, None, None]
    return out.reshape(xs.shape + (g.dim, g.dim))


@lru_cache(maxsize=32)
def _gauss_legendre(n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def _nodes(g: StepOperatorFunction, quad: QuadratureSpec):
    """Quadrature nodes on ``[x_0, x_m]`` and their ``dx`` weights."""
    t, w = _gauss_legendre(quad.nodes_per_segment)
    r = quad.refinement
    lo = np.arange(r) / r
    # u nodes in each of the r sub-intervals of [0, 1]
    u = (lo[:, None] + (t[None, :] + 1.0) / (2.0 * r)).ravel()
    wu = np.tile(w / (2.0 * r), r)
    k = quad.grading
    a = g.breakpoints[:-1, None]
    length = g.lengths[:, None]
    x = a + length * u[None, :] ** k
    dx = length * k * u[None, :] ** (k - 1) * wu[None, :]
    return x.ravel(), dx.ravel()


def _weight(x, weight: Weight):
    return np.ones_like(x) if weight is Weight.DX else 1.0 / x


def _tail(g: StepOperatorFunction, p: float, weight: Weight) -> np.ndarray:
    xm = g.breakpoints[-1]
    sp = power(g.total(), p, g.tol)
    if weight is Weight.DX_OVER_X:
        return sp * xm**-p / p
    return sp * xm ** (1.0 - p) / (p - 1.0)


def _check_p(p: float, weight: Weight):
    if weight is Weight.DX and not p > 1:
        raise ValueError(f"weight dx needs p > 1 for a convergent tail, got p={p}")
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")


def integral_avg_power(
    g: StepOperatorFunction,
    p: float,
    weight: Weight = Weight.DX_OVER_X,
    quad: QuadratureSpec = QuadratureSpec(),
) -> np.ndarray:
    """``int_0^inf ((1/x) int_0^x g)^p w(x) dx`` as a matrix."""
    _check_p(p, weight)
    x, dx = _nodes(g, quad)
    vals = power(cumulative_average(g, x), p, g.tol)
    vals = vals * (dx * _weight(x, weight))[:, None, None]
    return sym(pairwise_sum(vals) + _tail(g, p, weight))


def integral_power(
    g: StepOperatorFunction, p: float, weight: Weight = Weight.DX_OVER_X
) -> np.ndarray:
    """``int_0^inf g(x)^p w(x) dx``, exact for step functions."""
    _check_p(p, weight)
    bp = g.breakpoints
    if weight is Weight.DX:
        measure = np.diff(bp)
    else:
        measure = np.log(bp[1:] / bp[:-1])
    return (power(g.values, p, g.tol) * measure[:, None, None]).sum(axis=0)


def hardy_constant(p: float) -> float:
    """``(p / (p - 1))**p``."""
    return (p / (p - 1.0)) ** p


def _params(g, p, **extra):
    return {"p": float(p), "dim": g.dim, "segments": len(g.values), **extra}


def check_lemma_convexity(
    g: StepOperatorFunction,
    p: float,
    tol: ToleranceSpec = ToleranceSpec(),
    quad: QuadratureSpec = QuadratureSpec(),
) -> InequalityReport:
    """Loewner check ``int A(x)^p dx/x <= int g^p dx/x`` for ``1 <= p <= 2``."""
    if not 1 <= p <= 2:
        raise ValueError(
            f"the Loewner-order lemma needs 1 <= p <= 2 (got p={p}); "
            "use check_lemma_tracial for larger p"
        )
    lhs = integral_avg_power(g, p, Weight.DX_OVER_X, quad)
    rhs = integral_power(g, p, Weight.DX_OVER_X)
    return loewner_report("lemma_convexity", lhs, rhs, 1.0, tol, _params(g, p))


def check_lemma_tracial(
    g: StepOperatorFunction,
    p: float,
    tol: ToleranceSpec = ToleranceSpec(),
    quad: QuadratureSpec = QuadratureSpec(),
) -> InequalityReport:
    """Trace check of the same lemma, any ``p >= 1``."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    lhs = integral_avg_power(g, p, Weight.DX_OVER_X, quad)
    rhs = integral_power(g, p, Weight.DX_OVER_X)
    return scalar_report(
        "lemma_tracial", np.trace(lhs), np.trace(rhs), 1.0, tol, _params(g, p)
    )


def check_theorem_continuous(
    f: StepOperatorFunction,
    p: float,
    tol: ToleranceSpec = ToleranceSpec(),
    tracial: bool = False,
    quad: QuadratureSpec = QuadratureSpec(),
) -> InequalityReport:
    """Continuous Hardy inequality with weight ``dx`` and constant ``(p/(p-1))^p``.

    The Loewner form is checked for ``1 < p <= 2``; with ``tracial=True``
    the trace form is checked for any ``p > 1``.
    """
    if tracial and not p > 1:
        raise ValueError(f"tracial continuous check needs p > 1, got {p}")
    if not tracial and not 1 < p <= 2:
        raise ValueError(
            f"Loewner continuous check needs 1 < p <= 2, got {p}; pass tracial=True"
        )
    lhs = integral_avg_power(f, p, Weight.DX, quad)
    rhs = integral_power(f, p, Weight.DX)
    c = hardy_constant(p)
    params = _params(f, p, tracial=tracial)
    if tracial:
        return scalar_report(
            "theorem_continuous_tracial", np.trace(lhs), np.trace(rhs), c, tol, params
        )
    return loewner_report("theorem_continuous", lhs, rhs, c, tol, params)
