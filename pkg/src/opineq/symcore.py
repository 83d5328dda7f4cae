"""Dense real symmetric matrix calculus.

Matrices are plain float64 ``ndarray`` values of shape ``(d, d)``; every
function also accepts stacks of shape ``(..., d, d)`` and works on the whole
batch at once. The eigensolver is a compiled cyclic Jacobi iteration run on
each matrix of the batch independently, so a matrix decomposes bit-identically
regardless of what else is in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

__all__ = [
    "CLAMP_FLOOR",
    "ConvergenceError",
    "DomainError",
    "EigenDecomposition",
    "NotPSDError",
    "ToleranceSpec",
    "eigh",
    "eigvalsh",
    "exp",
    "log",
    "loewner_leq",
    "matfun",
    "min_eigenvalue",
    "power",
    "random_orthogonal",
    "random_psd",
    "spectral_radius",
    "sym",
    "trace",
]

CLAMP_FLOOR = 1e-12
MAX_SWEEPS = 100
_EPS = np.finfo(np.float64).eps


class ConvergenceError(ArithmeticError):
    """Jacobi iteration hit the sweep cap."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DomainError(ValueError):
    """A scalar function is undefined at some eigenvalue."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NotPSDError(DomainError):
    """An eigenvalue lies below ``-psd_tol``."""


@dataclass(frozen=True)
class ToleranceSpec:
    """Absolute eigenvalue floor, optionally scaled by ``max(1, ||A||_2)``."""

    psd_tol: float = 1e-9
    rel_scale: bool = True

    def __post_init__(self):
        if not self.psd_tol >= 0:
            raise ValueError(f"psd_tol must be non-negative, got {self.psd_tol}")

    def scaled(self, magnitude: float) -> float:
        if self.rel_scale:
            return self.psd_tol * max(1.0, float(magnitude))
        return self.psd_tol


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues[..., None, :]) @ np.swapaxes(
            self.vectors, -1, -2
        )


def sym(a) -> np.ndarray:
    """Return ``(A + A^T) / 2`` as a float64 array (batched allowed)."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    if a.shape[-1] < 1:
        raise ValueError("dimension must be at least 1")
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@numba.njit(cache=True)
def _jacobi_one(a, v, want_vectors):
    """Cyclic threshold Jacobi on one matrix in place; returns the residual."""
    d = a.shape[0]
    for sweep in range(1, MAX_SWEEPS + 1):
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                off += abs(a[p, q])
        if off == 0.0:
            return 0.0
        thresh = 0.2 * off / (d * d) if sweep < 4 else 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                g = 100.0 * abs(apq)
                app = a[p, p]
                aqq = a[q, q]
                if sweep > 4 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                if abs(apq) <= thresh or apq == 0.0:
                    continue
                h = aqq - app
                if abs(h) + g == abs(h):
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for r in range(d):
                    if r == p or r == q:
                        continue
                    arp = a[r, p]
                    arq = a[r, q]
                    a[r, p] = c * arp - s * arq
                    a[p, r] = a[r, p]
                    a[r, q] = s * arp + c * arq
                    a[q, r] = a[r, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                if want_vectors:
                    for r in range(d):
                        vrp = v[r, p]
                        vrq = v[r, q]
                        v[r, p] = c * vrp - s * vrq
                        v[r, q] = s * vrp + c * vrq
    off = 0.0
    for p in range(d - 1):
        for q in range(p + 1, d):
            off += abs(a[p, q])
    return off


@numba.njit(cache=True)
def _jacobi_batch(a, v, want_vectors):
    worst = 0.0
    for b in range(a.shape[0]):
        res = _jacobi_one(a[b], v[b], want_vectors)
        if res > worst:
            worst = res
    return worst


def _jacobi(a: np.ndarray, want_vectors: bool):
    """Decompose a stack ``(B, d, d)`` in place; each matrix independently."""
    nb, d, _ = a.shape
    v = np.broadcast_to(np.eye(d), (nb, d, d)).copy()
    residual = _jacobi_batch(a, v, want_vectors)
    if residual > 0.0:
        raise ConvergenceError(
            f"Jacobi did not converge in {MAX_SWEEPS} sweeps "
            f"(off-diagonal residual {residual:.3e})",
            residual=float(residual),
        )
    return np.diagonal(a, axis1=-2, axis2=-1).copy(), v if want_vectors else None


def _flatten(a):
    a = sym(a)
    shape = a.shape[:-2]
    d = a.shape[-1]
    return a.reshape(-1, d, d).copy(), shape, d


def eigh(a) -> EigenDecomposition:
    """Eigendecomposition with ascending eigenvalues.

    Eigenvector signs are fixed so the first component above ``1e-12`` in
    magnitude is positive.
    """
    flat, shape, d = _flatten(a)
    w, v = _jacobi(flat, want_vectors=True)
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    first = np.argmax(np.abs(v) > 1e-12, axis=-2)
    lead = np.take_along_axis(v, first[:, None, :], axis=-2)
    v = v * np.where(lead < 0, -1.0, 1.0)
    return EigenDecomposition(w.reshape(*shape, d), v.reshape(*shape, d, d))


def eigvalsh(a) -> np.ndarray:
    """Ascending eigenvalues only (same iteration as :func:`eigh`)."""
    flat, shape, d = _flatten(a)
    w, _ = _jacobi(flat, want_vectors=False)
    return np.sort(w, axis=-1).reshape(*shape, d)


def min_eigenvalue(a) -> np.ndarray:
    return eigvalsh(a)[..., 0]


def spectral_radius(a) -> np.ndarray:
    return np.abs(eigvalsh(a)).max(axis=-1)


def _compose(dec: EigenDecomposition, fw: np.ndarray) -> np.ndarray:
    vecs = dec.vectors
    return sym((vecs * fw[..., None, :]) @ np.swapaxes(vecs, -1, -2))


def matfun(a, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Spectral calculus ``U f(diag w) U^T``; ``f`` acts on an eigenvalue array."""
    dec = eigh(a)
    with np.errstate(all="ignore"):
        fw = np.asarray(f(dec.eigenvalues), dtype=np.float64)
    bad = ~np.isfinite(fw)
    if bad.any():
        lam = float(dec.eigenvalues[bad].flat[0])
        raise DomainError(f"function undefined at eigenvalue {lam!r}", lam)
    return _compose(dec, fw)


def _noise_floor(w: np.ndarray) -> np.ndarray:
    d = w.shape[-1]
    return 32.0 * d * _EPS * np.abs(w).max(axis=-1, keepdims=True)


def _check_psd(w: np.ndarray, tol: ToleranceSpec):
    scale = np.abs(w).max(axis=-1, keepdims=True)
    limit = -tol.psd_tol * (np.maximum(1.0, scale) if tol.rel_scale else 1.0)
    bad = w < limit
    if bad.any():
        lam = float(w[bad].flat[0])
        raise NotPSDError(f"matrix is not PSD: eigenvalue {lam!r}", lam)


def _power_values(w: np.ndarray, p: float, tol: ToleranceSpec) -> np.ndarray:
    if float(p).is_integer() and p >= 0:
        return w ** int(p)
    _check_psd(w, tol)
    if p > 0:
        # Eigenvalues at roundoff level are exact zeros of a PSD matrix.
        w = np.where(w <= _noise_floor(w), 0.0, w)
    else:
        w = np.maximum(w, CLAMP_FLOOR)
    return w**p


def power(a, p: float, tol: ToleranceSpec = ToleranceSpec()) -> np.ndarray:
    """Matrix power ``A^p``.

    Non-negative integer ``p`` is applied to any symmetric matrix. Otherwise
    ``A`` must be PSD within ``tol``; for ``p > 0`` eigenvalues at roundoff
    level are treated as zero, for ``p < 0`` they are lifted to
    :data:`CLAMP_FLOOR`.
    """
    dec = eigh(a)
    return _compose(dec, _power_values(dec.eigenvalues, float(p), tol))


def log(a, tol: ToleranceSpec = ToleranceSpec(), clamp: bool = True) -> np.ndarray:
    dec = eigh(a)
    w = dec.eigenvalues
    _check_psd(w, tol)
    if clamp:
        w = np.maximum(w, CLAMP_FLOOR)
    elif (w <= 0).any():
        lam = float(w[w <= 0].flat[0])
        raise DomainError(f"log undefined at eigenvalue {lam!r}", lam)
    return _compose(dec, np.log(w))


def exp(a) -> np.ndarray:
    dec = eigh(a)
    return _compose(dec, np.exp(dec.eigenvalues))


def trace(a) -> np.ndarray | float:
    t = np.trace(np.asarray(a, dtype=np.float64), axis1=-2, axis2=-1)
    return float(t) if np.ndim(t) == 0 else t


def loewner_leq(a, b, tol: ToleranceSpec = ToleranceSpec()) -> tuple[bool, float]:
    """Test ``A <= B``; returns ``(verdict, smallest eigenvalue of B - A)``."""
    a = sym(a)
    b = sym(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    w = eigvalsh(b - a)
    gap = float(w[0])
    scale = float(np.abs(w).max()) if tol.rel_scale else 0.0
    return gap >= -tol.scaled(scale), gap


def random_psd(dim: int, rank: int | None = None, rng=None) -> np.ndarray:
    """``G^T G`` with ``G`` a ``rank x dim`` standard normal matrix."""
    rank = dim if rank is None else rank
    if dim < 1 or not 1 <= rank <= dim:
        raise ValueError(f"need 1 <= rank <= dim, got rank={rank}, dim={dim}")
    rng = np.random.default_rng(rng)
    g = rng.standard_normal((rank, dim))
    return sym(g.T @ g)


def random_orthogonal(dim: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)
