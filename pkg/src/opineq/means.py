"""Operator power means, the tracial geometric mean and the Phi_p functional.

The tracial geometric mean ``TG(a_1..a_n)`` is the limit of
``Tr ((1/n) sum a_k^(1/p))^p`` as ``p -> inf``. The traces are evaluated on
``(1/n) sum (a_k^(1/p) - I)`` with ``expm1``/``log1p`` so there is no
cancellation against the identity, and the limit is accelerated by
Richardson extrapolation in ``1/p``. For singular entries the eigenvalues of
that average which stay near zero are refined through a Schur complement, so
they keep full relative accuracy at large ``p``. Exponents whose estimated
roundoff exceeds the monotonicity tolerance are not used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reports import InequalityReport, scalar_report
from .sequence import OperatorSequence, power_sum
from .symcore import (
    DomainError,
    ToleranceSpec,
    _check_psd,
    _EPS,
    _noise_floor,
    eigh,
    eigvalsh,
    log,
    power,
    random_orthogonal,
    random_psd,
    sym,
    trace,
)

__all__ = [
    "NumericalIntegrityError",
    "PSchedule",
    "StrictPositivityError",
    "TGLimit",
    "check_phi_concavity",
    "check_phi_convexity",
    "check_tg_dual",
    "phi",
    "power_mean",
    "prefix_tg_limit",
    "prefix_tg_logexp",
    "tg_limit",
    "tg_logexp",
    "tg_property_checks",
]


class NumericalIntegrityError(ArithmeticError):
    """``Tr M_p`` increased along the schedule beyond roundoff."""


class StrictPositivityError(DomainError):
    pass


@dataclass(frozen=True)
class PSchedule:
    exponents: tuple[float, ...] = tuple(2.0**k for k in range(61))
    cauchy_tol: float = 1e-11
    monotone_tol: float = 1e-10
    richardson: int = 4
    chunk: int = 12

    def __post_init__(self):
        e = np.asarray(self.exponents)
        if e.size == 0 or np.any(e < 1) or np.any(np.diff(e) <= 0):
            raise ValueError("exponents must be increasing and >= 1")


@dataclass(frozen=True)
class TGLimit:
    value: float
    exponent: float
    converged: bool
    values: tuple[float, ...] = field(repr=False, default=())

    def __float__(self):
        return self.value


def _stack(mats) -> np.ndarray:
    a = sym(mats)
    if a.ndim == 2:
        a = a[None]
    return a


def power_mean(mats, p: float, tol: ToleranceSpec = ToleranceSpec()) -> np.ndarray:
    """``M_p = ((1/n) sum a_k^(1/p))^p`` for ``p >= 1``."""
    if not p >= 1:
        raise ValueError(f"power mean needs p >= 1, got {p}")
    a = _stack(mats)
    return power(power(a, 1.0 / p, tol).mean(axis=0), p, tol)


def _spectra(a: np.ndarray, tol: ToleranceSpec):
    dec = eigh(a)
    w = dec.eigenvalues
    _check_psd(w, tol)
    w = np.where(w <= _noise_floor(w), 0.0, w)
    with np.errstate(divide="ignore"):
        return np.log(w), dec.vectors


def _support_split(logw, vecs):
    """Basis adapted to the kernels of the tuple, or ``None`` if there are none.

    ``kbar = (1/n) sum_k (kernel projector of a_k)`` vanishes exactly on the
    intersection of the supports and is small on directions close to it.
    Eigenvalues of ``D`` along small-``kbar`` directions stay near zero and
    are refined through a Schur complement; the remaining ones decay.
    """
    kernel = np.isneginf(logw).astype(np.float64)
    if not kernel.any():
        return None
    kbar = ((vecs * kernel[:, None, :]) @ np.swapaxes(vecs, -1, -2)).mean(axis=0)
    dec = eigh(kbar)
    # rotate each a_k's eigenbasis into the kbar eigenbasis; products of tiny
    # overlaps keep kbar accurate to O(eps^2) on the common support
    c = np.swapaxes(vecs, -1, -2) @ dec.vectors
    kp = (np.swapaxes(c, -1, -2) * kernel[:, None, :]) @ c
    return {"c": c, "kp": kp.mean(axis=0), "kappa": np.maximum(dec.eigenvalues, 0.0)}


def _schur_eigs(dp, k):
    """Eigenvalues of ``dp`` belonging to its leading ``k x k`` block.

    Valid when that block and the coupling are small against the trailing
    block, which is then negative definite; solved by fixed-point iteration
    on ``x - y (z - m)^-1 y^T``.
    """
    x = dp[:, :k, :k]
    y = dp[:, :k, k:]
    z = dp[:, k:, k:]
    yt = np.swapaxes(y, -1, -2)
    eye = np.eye(z.shape[-1])
    m = eigvalsh(x - y @ np.linalg.solve(z, yt))
    for _ in range(3):
        new = np.empty_like(m)
        for j in range(k):
            t = x - y @ np.linalg.solve(z - m[:, j, None, None] * eye, yt)
            new[:, j] = eigvalsh(t)[:, j]
        m = new
    return m


def _trace_means(logw, vecs, exponents, split=None):
    """``Tr M_p`` per exponent and a relative roundoff estimate for each."""
    p = np.asarray(exponents, dtype=np.float64)
    n, d = logw.shape
    kernel = np.isneginf(logw)
    with np.errstate(invalid="ignore"):
        fw = np.expm1(logw[None, :, :] / p[:, None, None])
    fw = np.where(kernel[None], -1.0, fw)
    # D = (1/n) sum_k U_k diag(expm1(log w / p)) U_k^T, shape (c, d, d)
    dmat = ((vecs[None] * fw[:, :, None, :]) @ np.swapaxes(vecs, -1, -2)[None]).mean(axis=1)
    mu = np.maximum(eigvalsh(dmat), -1.0)
    err = d * _EPS * p[:, None] * np.abs(mu).max(axis=-1, keepdims=True)
    err = np.broadcast_to(err, mu.shape).copy()
    if split is not None:
        c = split["c"]
        kappa = split["kappa"]
        fs = np.where(kernel[None], 0.0, fw)
        sp = ((np.swapaxes(c, -1, -2)[None] * fs[:, :, None, :]) @ c[None]).mean(axis=1)
        dp = sp - split["kp"]
        todo = np.ones(p.size, dtype=bool)
        for k in range(1, d):
            if not todo.any():
                break
            size = np.abs(dp[:, :k, :k]).max(axis=(1, 2)) + np.abs(dp[:, :k, k:]).max(axis=(1, 2))
            rows = np.flatnonzero(todo & (size <= 1e-2 * kappa[k]))
            if rows.size == 0:
                continue
            m = _schur_eigs(dp[rows], k)
            mu[rows, d - k :] = m
            err[rows, d - k :] = d * _EPS * p[rows, None] * size[rows, None]
            todo[rows] = False
    with np.errstate(divide="ignore", over="ignore"):
        contrib = np.exp(p[:, None] * np.log1p(mu))
    values = contrib.sum(axis=-1)
    noise = (contrib * err).sum(axis=-1) / np.maximum(1.0, values)
    return values, noise


def _prefix_trace_means(logw, vecs, exponents):
    """``Tr M_p`` of every prefix of a strictly positive sequence; shape ``(N, c)``."""
    p = np.asarray(exponents, dtype=np.float64)
    n, d = logw.shape
    fw = np.expm1(logw[None, :, :] / p[:, None, None])
    terms = (vecs[None] * fw[:, :, None, :]) @ np.swapaxes(vecs, -1, -2)[None]
    dmat = np.cumsum(terms, axis=1) / np.arange(1, n + 1)[None, :, None, None]
    mu = eigvalsh(dmat)
    pb = p[:, None, None]
    contrib = np.exp(pb * np.log1p(mu))
    values = contrib.sum(axis=-1)
    err = d * _EPS * pb * np.abs(mu).max(axis=-1, keepdims=True)
    noise = (contrib * err).sum(axis=-1) / np.maximum(1.0, values)
    return values.T, noise.T


def _richardson(values: np.ndarray, exps: np.ndarray, depth: int) -> np.ndarray:
    """Neville extrapolation to ``1/p -> 0``; entry ``k`` uses values ``<= k``."""
    h = 1.0 / exps
    est = values.copy()
    cols = values.copy()
    for j in range(1, min(depth, len(values) - 1) + 1):
        nxt = cols[1:] + (cols[1:] - cols[:-1]) / (h[:-j] / h[j:] - 1.0)
        est[j:] = nxt
        cols = nxt
    return est


def _pick(values: np.ndarray, noise: np.ndarray, exps: np.ndarray, schedule):
    """Select the limit for one row of raw traces.

    Returns ``(value, index, converged, usable)`` where ``usable`` counts the
    leading exponents whose roundoff stays below ``monotone_tol``.
    """
    bad = np.flatnonzero(noise > schedule.monotone_tol)
    usable = int(bad[0]) if bad.size else len(values)
    usable = max(usable, 1)
    v = values[:usable]
    scale = np.maximum(1.0, np.abs(v))
    rise = v[1:] - v[:-1]
    if np.any(rise > schedule.monotone_tol * scale[:-1]):
        worst = float((rise / scale[:-1]).max())
        raise NumericalIntegrityError(
            f"Tr M_p increased along the schedule (relative rise {worst:.3e})"
        )
    est = _richardson(v, exps[:usable], schedule.richardson)
    close = np.abs(est[1:] - est[:-1]) < schedule.cauchy_tol * np.maximum(1.0, np.abs(est[1:]))
    k = int(np.argmax(close)) + 1 if close.any() else usable - 1
    # the limit lies in [0, Tr M_p] for every p
    return float(np.clip(est[k], 0.0, v[k])), k, bool(close.any()), usable


def _limit(compute, exps, schedule: PSchedule):
    """Evaluate ``compute(chunk) -> (values, noise)`` chunk by chunk until settled."""
    vals, noise = [], []
    done = 0
    while done < exps.size:
        stop = min(exps.size, done + schedule.chunk)
        v, e = compute(exps[done:stop])
        vals.append(np.atleast_2d(v))
        noise.append(np.atleast_2d(e))
        done = stop
        values = np.concatenate(vals, axis=-1)
        noises = np.concatenate(noise, axis=-1)
        rows = [_pick(r, e, exps[:done], schedule) for r, e in zip(values, noises)]
        if all(conv or usable < done for _, _, conv, usable in rows):
            break
    return values, rows


def tg_limit(mats, schedule: PSchedule = PSchedule(), tol: ToleranceSpec = ToleranceSpec()) -> TGLimit:
    """Tracial geometric mean as the limit of ``Tr M_p`` along ``schedule``.

    Accepts singular PSD entries. Raises :class:`NumericalIntegrityError` if
    the traces fail to be non-increasing in ``p``. The reported value is the
    Richardson-extrapolated trace at the first exponent where successive
    estimates agree to ``cauchy_tol``; ``values`` holds the raw traces.
    """
    logw, vecs = _spectra(_stack(mats), tol)
    split = _support_split(logw, vecs)
    exps = np.asarray(schedule.exponents, dtype=np.float64)
    values, rows = _limit(lambda e: _trace_means(logw, vecs, e, split), exps, schedule)
    value, k, conv, usable = rows[0]
    return TGLimit(value, float(exps[k]), conv, tuple(values[0, :usable].tolist()))


def prefix_tg_limit(
    a: OperatorSequence, schedule: PSchedule = PSchedule()
) -> tuple[np.ndarray, np.ndarray]:
    """``TG(a_1..a_n)`` for every prefix ``n``; returns ``(values, converged)``.

    Strictly positive sequences share one batched evaluation of all prefixes;
    sequences with singular terms fall back to one limit per prefix.
    """
    logw, vecs = _spectra(a.terms, a.tol)
    if np.isneginf(logw).any():
        lims = [tg_limit(a.terms[: n + 1], schedule, a.tol) for n in range(len(a))]
        return np.array([x.value for x in lims]), np.array([x.converged for x in lims])
    exps = np.asarray(schedule.exponents, dtype=np.float64)
    _, rows = _limit(lambda e: _prefix_trace_means(logw, vecs, e), exps, schedule)
    return np.array([r[0] for r in rows]), np.array([r[2] for r in rows])


def _require_strict(a: np.ndarray, floor: float):
    w = eigvalsh(a)[..., 0]
    bad = np.flatnonzero(w <= floor)
    if bad.size:
        k = int(bad[0])
        raise StrictPositivityError(
            f"entry {k} is not strictly positive (min eigenvalue {w[k]!r} <= {floor})",
            float(w[k]),
        )


def tg_logexp(mats, floor: float = 1e-10) -> float:
    """``Tr exp((1/n) sum log a_k)`` for strictly positive entries."""
    a = _stack(mats)
    _require_strict(a, floor)
    return float(np.exp(eigvalsh(log(a).mean(axis=0))).sum())


def prefix_tg_logexp(a: OperatorSequence, floor: float = 1e-10) -> np.ndarray:
    """``TG(a_1..a_n)`` for every prefix via a running sum of logarithms."""
    _require_strict(a.terms, floor)
    logs = np.cumsum(log(a.terms), axis=0)
    logs /= np.arange(1, len(a) + 1)[:, None, None]
    return np.exp(eigvalsh(logs)).sum(axis=-1)


def phi(a: OperatorSequence, p: float) -> float:
    """``Tr (sum a_n^p)^(1/p)``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    return trace(power(power_sum(a, p), 1.0 / p, a.tol))


def _midpoint(a: OperatorSequence, b: OperatorSequence) -> OperatorSequence:
    return OperatorSequence(0.5 * (a.terms + b.terms), a.tol, validate=False)


def check_phi_concavity(a, b, p, tol: ToleranceSpec = ToleranceSpec(1e-7)) -> InequalityReport:
    """``(Phi_p(a) + Phi_p(b))/2 <= Phi_p((a+b)/2)`` for ``0 < p <= 1``."""
    if not 0 < p <= 1:
        raise ValueError(f"concavity is sampled for 0 < p <= 1, got {p}")
    avg = 0.5 * (phi(a, p) + phi(b, p))
    mid = phi(_midpoint(a, b), p)
    params = {"p": float(p), "dim": a.dim, "N": len(a)}
    return scalar_report("phi_concavity", avg, mid, 1.0, tol, params)


def check_phi_convexity(a, b, p, tol: ToleranceSpec = ToleranceSpec(1e-7)) -> InequalityReport:
    """``Phi_p((a+b)/2) <= (Phi_p(a) + Phi_p(b))/2`` for ``1 <= p <= 2``."""
    if not 1 <= p <= 2:
        raise ValueError(f"convexity is sampled for 1 <= p <= 2, got {p}")
    avg = 0.5 * (phi(a, p) + phi(b, p))
    mid = phi(_midpoint(a, b), p)
    params = {"p": float(p), "dim": a.dim, "N": len(a)}
    return scalar_report("phi_convexity", mid, avg, 1.0, tol, params)


def _equality(name, got, want, rel, params) -> InequalityReport:
    tol = rel * max(1.0, abs(want))
    return InequalityReport(
        name=name,
        gap=-abs(got - want),
        tolerance=tol,
        lhs=float(got),
        rhs=float(want),
        params=params,
    )


def check_tg_dual(mats, schedule: PSchedule = PSchedule()) -> InequalityReport:
    """Agreement of the limit and log-exp characterizations.

    Passes when they differ by at most ``max(1e-5, 1e-4 * value)``.
    """
    a = _stack(mats)
    lim = tg_limit(a, schedule)
    le = tg_logexp(a)
    params = {"n": a.shape[0], "dim": a.shape[-1], "converged": lim.converged}
    return InequalityReport(
        name="tg_dual",
        gap=-abs(lim.value - le),
        tolerance=max(1e-5, 1e-4 * abs(le)),
        lhs=lim.value,
        rhs=le,
        params=params,
    )


def _commuting_partner(a: np.ndarray):
    dec = eigh(a[0])
    w = eigvalsh(a)
    w = np.where(w <= _noise_floor(w), 0.0, w)
    u = dec.vectors
    comm = (u[None] * w[:, None, :]) @ u.T[None]
    expected = float(np.prod(w, axis=0) ** (1.0 / a.shape[0]) @ np.ones(a.shape[-1]))
    return comm, expected


def _random_increment(ak: np.ndarray, rng) -> np.ndarray:
    d = ak.shape[-1]
    inc = random_psd(d, int(rng.integers(1, d + 1)), rng)
    norm = float(np.abs(eigvalsh(inc)).max())
    target = 0.1 * float(np.abs(eigvalsh(ak)).max()) * rng.uniform(0.0, 1.0)
    return inc * (target / norm) if norm > 0 else inc


def tg_property_checks(
    mats,
    rng,
    schedule: PSchedule = PSchedule(),
    eq_tol: float = 1e-8,
    ineq_tol: float = 1e-7,
) -> list[InequalityReport]:
    """Sample eight structural properties of TG on one tuple.

    Equalities pass within ``eq_tol * max(1, value)``, inequalities within
    ``ineq_tol * max(1, value)``. ``rng`` draws the auxiliary data
    (scalars, permutations, rotations, second tuples).
    """
    rng = np.random.default_rng(rng)
    a = _stack(mats)
    n, d = a.shape[0], a.shape[-1]
    ineq = ToleranceSpec(ineq_tol)
    base = {"n": n, "dim": d}

    def tg(x):
        return tg_limit(x, schedule).value

    def other_tuple(dim):
        return np.array([random_psd(dim, int(rng.integers(1, dim + 1)), rng) for _ in range(n)])

    t0 = tg(a)
    out = []

    comm, expected = _commuting_partner(a)
    out.append(_equality("tg_commuting", tg(comm), expected, eq_tol, base))

    out.append(_equality("tg_mean", tg(np.repeat(a[:1], n, axis=0)), trace(a[0]), eq_tol, base))

    t = float(10.0 ** rng.uniform(-3, 3))
    out.append(_equality("tg_homogeneous", tg(t * a), t * t0, eq_tol, {**base, "t": t}))

    perm = rng.permutation(n)
    out.append(_equality("tg_symmetric", tg(a[perm]), t0, eq_tol, base))

    u = random_orthogonal(d, rng)
    out.append(_equality("tg_unitary", tg(u[None] @ a @ u.T[None]), t0, eq_tol, base))

    d2 = int(rng.integers(1, 4))
    b = other_tuple(d2)
    block = np.zeros((n, d + d2, d + d2))
    block[:, :d, :d] = a
    block[:, d:, d:] = b
    out.append(_equality("tg_block_additive", tg(block), t0 + tg(b), eq_tol, base))

    k = int(rng.integers(n))
    bigger = a.copy()
    bigger[k] = a[k] + _random_increment(a[k], rng)
    out.append(scalar_report("tg_monotone", t0, tg(bigger), 1.0, ineq, {**base, "k": k}))

    c = other_tuple(d)
    mid = tg(0.5 * (a + c))
    avg = 0.5 * (t0 + tg(c))
    out.append(scalar_report("tg_concave", avg, mid, 1.0, ineq, base))
    return out
