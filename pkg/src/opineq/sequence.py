"""Finite sequences of PSD matrices and the Hardy averaging operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symcore import NotPSDError, ToleranceSpec, eigvalsh, power, sym

__all__ = [
    "OperatorSequence",
    "hardy_transform",
    "power_sum",
    "truncate_extend",
]


@dataclass(frozen=True, eq=False)
class OperatorSequence:
    """Terms ``a_1..a_N`` stacked into an array of shape ``(N, d, d)``.

    Terms beyond ``N`` are zero. The constructor symmetrizes and, unless
    ``validate=False``, checks every term is PSD within ``tol``.
    """

    terms: np.ndarray
    tol: ToleranceSpec = ToleranceSpec()
    validate: bool = True

    def __post_init__(self):
        terms = sym(self.terms)
        if terms.ndim == 2:
            terms = terms[None]
        if terms.ndim != 3 or terms.shape[0] < 1:
            raise ValueError(f"expected (N, d, d) terms, got shape {terms.shape}")
        terms.setflags(write=False)
        object.__setattr__(self, "terms", terms)
        if self.validate:
            w = eigvalsh(terms)
            scale = np.maximum(1.0, np.abs(w).max(axis=-1)) if self.tol.rel_scale else 1.0
            bad = np.flatnonzero(w[:, 0] < -self.tol.psd_tol * scale)
            if bad.size:
                n = int(bad[0])
                lam = float(w[n, 0])
                raise NotPSDError(f"term {n} is not PSD: eigenvalue {lam!r}", lam)

    @classmethod
    def from_scalars(cls, values) -> OperatorSequence:
        v = np.asarray(values, dtype=np.float64).reshape(-1, 1, 1)
        return cls(v)

    @property
    def dim(self) -> int:
        return self.terms.shape[-1]

    def __len__(self) -> int:
        return self.terms.shape[0]

    def __getitem__(self, n):
        return self.terms[n]

    def scaled(self, t: float) -> OperatorSequence:
        return OperatorSequence(t * self.terms, self.tol, validate=False)


def hardy_transform(a: OperatorSequence) -> OperatorSequence:
    """Running averages ``(1/n) sum_{k<=n} a_k`` via a running prefix sum."""
    n = np.arange(1, len(a) + 1, dtype=np.float64)
    avg = np.cumsum(a.terms, axis=0) / n[:, None, None]
    return OperatorSequence(avg, a.tol, validate=False)


def power_sum(a: OperatorSequence, p: float) -> np.ndarray:
    """``sum_n a_n^p`` over the stored terms."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    return power(a.terms, p, a.tol).sum(axis=0)


def truncate_extend(a: OperatorSequence, m: int) -> OperatorSequence:
    """Keep the first ``min(N, m)`` terms and zero-pad to length ``m``."""
    if m < 1:
        raise ValueError(f"truncation length must be >= 1, got {m}")
    kept = a.terms[:m]
    if len(kept) < m:
        pad = np.zeros((m - len(kept), a.dim, a.dim))
        kept = np.concatenate([kept, pad])
    return OperatorSequence(kept, a.tol, validate=False)
