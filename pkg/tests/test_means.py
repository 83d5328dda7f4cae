import math

import mpmath
import numpy as np
import pytest
from scipy.linalg import expm, logm

from opineq import means
from opineq.means import (
    NumericalIntegrityError,
    PSchedule,
    StrictPositivityError,
    check_phi_concavity,
    check_phi_convexity,
    check_tg_dual,
    phi,
    power_mean,
    prefix_tg_limit,
    prefix_tg_logexp,
    tg_limit,
    tg_logexp,
    tg_property_checks,
)
from opineq.sequence import OperatorSequence
from opineq.symcore import random_psd


def _mp_trace_mean(mats, p, dps=60):
    """Tr ((1/n) sum a_k^(1/p))^p in high precision; tiny eigenvalues count as zero."""
    with mpmath.workdps(dps):
        n = len(mats)
        d = mats[0].shape[0]
        acc = mpmath.zeros(d, d)
        for a in mats:
            e, q = mpmath.eigsy(mpmath.matrix(a.tolist()))
            top = max(abs(x) for x in e)
            root = [x ** (mpmath.mpf(1) / p) if x > 1e-13 * top else mpmath.mpf(0) for x in e]
            acc += q * mpmath.diag(root) * q.T
        e, _ = mpmath.eigsy(acc / n)
        return sum(max(x, 0) ** p for x in e)


def _mp_tg(mats):
    # T_p = TG + c/p + O(1/p^2); extrapolate from p and 2p
    p = mpmath.mpf(10) ** 10
    return float(2 * _mp_trace_mean(mats, 2 * p) - _mp_trace_mean(mats, p))


def test_power_mean_basics():
    rng = np.random.default_rng(0)
    a = np.array([random_psd(3, 3, rng) for _ in range(4)])
    np.testing.assert_allclose(power_mean(a, 1), a.mean(axis=0), rtol=1e-12, atol=1e-14)
    d = np.array([np.diag([1.0, 4.0]), np.diag([9.0, 16.0])])
    np.testing.assert_allclose(power_mean(d, 2), np.diag([4.0, 9.0]), rtol=1e-13)
    with pytest.raises(ValueError):
        power_mean(a, 0.5)


def test_commuting_and_scalar_limits():
    d = np.array([np.diag([1.0, 4.0]), np.diag([9.0, 16.0])])
    assert tg_limit(d).value == pytest.approx(3.0 + 8.0, rel=1e-10)
    assert tg_limit([[[2.0]], [[8.0]]]).value == pytest.approx(4.0, rel=1e-10)
    singular = np.array([np.diag([1.0, 4.0, 0.0]), np.diag([9.0, 16.0, 0.0]), np.diag([2.0, 0.0, 3.0])])
    lim = tg_limit(singular)
    assert lim.converged
    assert lim.value == pytest.approx(18.0 ** (1 / 3), rel=1e-10)


def test_repeated_entry_gives_trace():
    rng = np.random.default_rng(1)
    a = random_psd(4, 2, rng)
    assert tg_limit(np.stack([a, a, a])).value == pytest.approx(np.trace(a), rel=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_singular_noncommuting_against_high_precision(seed):
    rng = np.random.default_rng(100 + seed)
    d = int(rng.integers(2, 5))
    n = int(rng.integers(2, 4))
    mats = [random_psd(d, int(rng.integers(1, d + 1)), rng) for _ in range(n)]
    mats[0] = random_psd(d, d, rng)
    lim = tg_limit(np.array(mats))
    assert lim.converged
    assert lim.value == pytest.approx(_mp_tg(mats), rel=1e-8, abs=1e-9)


def test_logexp_against_scipy():
    rng = np.random.default_rng(2)
    a = np.array([random_psd(3, 3, rng) + 0.05 * np.eye(3) for _ in range(3)])
    want = np.trace(expm(sum(logm(x).real for x in a) / 3))
    assert tg_logexp(a) == pytest.approx(want, rel=1e-10)
    with pytest.raises(StrictPositivityError, match="entry 1"):
        tg_logexp(np.stack([np.eye(2), np.diag([1.0, 0.0])]))


def test_dual_and_monotone_traces():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n, d = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        a = np.array([random_psd(d, d, rng) + 1e-2 * np.eye(d) for _ in range(n)])
        lim = tg_limit(a)
        assert lim.converged
        assert lim.value == pytest.approx(tg_logexp(a), rel=1e-9)
        v = np.array(lim.values)
        assert np.all(np.diff(v) <= 1e-12 * v[:-1])
        assert check_tg_dual(a).passed


def test_float_conversion_and_schedule_validation():
    assert float(tg_limit([[[3.0]]])) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        PSchedule(exponents=(4.0, 2.0))
    with pytest.raises(ValueError):
        PSchedule(exponents=())


def test_increasing_traces_raise(monkeypatch):
    def rising(logw, vecs, exponents, split=None):
        e = np.asarray(exponents, dtype=np.float64)
        return e.copy(), np.zeros_like(e)

    monkeypatch.setattr(means, "_trace_means", rising)
    with pytest.raises(NumericalIntegrityError):
        tg_limit(np.stack([np.eye(2), 2 * np.eye(2)]))


def test_prefix_modes_agree():
    rng = np.random.default_rng(4)
    a = OperatorSequence(np.array([random_psd(3, 3, rng) + 0.1 * np.eye(3) for _ in range(12)]))
    v, conv = prefix_tg_limit(a)
    assert conv.all()
    np.testing.assert_allclose(v, prefix_tg_logexp(a), rtol=1e-9)
    for n in (1, 5, 12):
        assert v[n - 1] == pytest.approx(tg_logexp(a.terms[:n]), rel=1e-9)


def test_prefix_with_singular_terms():
    rng = np.random.default_rng(5)
    terms = np.array([random_psd(3, int(rng.integers(1, 4)), rng) for _ in range(5)])
    v, conv = prefix_tg_limit(OperatorSequence(terms))
    assert conv.all()
    for n in range(1, 6):
        assert v[n - 1] == pytest.approx(tg_limit(terms[:n]).value, rel=1e-12, abs=1e-14)


def test_phi_scalar_and_checks():
    a = OperatorSequence.from_scalars([3.0, 4.0])
    assert phi(a, 2.0) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        phi(a, 0.0)
    rng = np.random.default_rng(6)
    for _ in range(10):
        x = OperatorSequence(np.array([random_psd(3, 2, rng) for _ in range(4)]))
        y = OperatorSequence(np.array([random_psd(3, 2, rng) for _ in range(4)]))
        assert check_phi_concavity(x, y, float(rng.uniform(0.05, 1.0))).passed
        assert check_phi_convexity(x, y, float(rng.uniform(1.0, 2.0))).passed
    with pytest.raises(ValueError):
        check_phi_concavity(x, y, 1.5)
    with pytest.raises(ValueError):
        check_phi_convexity(x, y, 2.5)


def test_property_suite_sample():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n, d = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        a = np.array([random_psd(d, int(rng.integers(1, d + 1)), rng) for _ in range(n)])
        reports = tg_property_checks(a, rng)
        assert [r.name for r in reports] == [
            "tg_commuting",
            "tg_mean",
            "tg_homogeneous",
            "tg_symmetric",
            "tg_unitary",
            "tg_block_additive",
            "tg_monotone",
            "tg_concave",
        ]
        assert all(r.passed for r in reports), [r.to_dict() for r in reports if not r.passed]


def test_geometric_mean_of_scalars_matches_closed_form():
    xs = [0.5, 3.0, 7.0, 1e-3]
    want = math.prod(xs) ** (1 / len(xs))
    assert tg_limit(np.array(xs).reshape(-1, 1, 1)).value == pytest.approx(want, rel=1e-10)
