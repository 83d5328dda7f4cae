import math

import numpy as np
import pytest
from scipy.integrate import quad

from opineq.stepfun import (
    QuadratureSpec,
    StepOperatorFunction,
    Weight,
    check_lemma_convexity,
    check_lemma_tracial,
    check_theorem_continuous,
    cumulative_average,
    hardy_constant,
    integral_avg_power,
    integral_power,
    pairwise_sum,
)
from opineq.symcore import NotPSDError, random_psd


def _random_step(seed, dim=2, segments=3):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0.2, 5.0, size=segments + 1))
    values = np.array([random_psd(dim, int(rng.integers(1, dim + 1)), rng) for _ in range(segments)])
    return StepOperatorFunction(x, values)


def _avg_power_entry(g, p, weight, i, j):
    """Entry (i, j) of the weighted average-power integral by adaptive quadrature."""
    bp = g.breakpoints

    def f(x):
        a = cumulative_average(g, x)
        w, v = np.linalg.eigh(a)
        w = np.clip(w, 0.0, None)
        m = (v * w**p) @ v.T
        return m[i, j] * (1.0 if weight is Weight.DX else 1.0 / x)

    total = 0.0
    for lo, hi in zip(bp[:-1], bp[1:]):
        total += quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    total += quad(f, bp[-1], np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return total


def test_exact_scalar_case():
    # g = 1 on (1, 2], p = 2, weight dx/x: ln 2 - 1/2
    g = StepOperatorFunction([1.0, 2.0], [[[1.0]]])
    got = integral_avg_power(g, 2.0)[0, 0]
    assert got == pytest.approx(math.log(2.0) - 0.5, rel=1e-14)


def test_cumulative_average_piecewise():
    g = _random_step(0)
    for x in [0.1, g.breakpoints[1] - 1e-3, 3.0, 20.0]:
        want = np.zeros((2, 2))
        for lo, hi, v in zip(g.breakpoints[:-1], g.breakpoints[1:], g.values):
            length = max(0.0, min(hi, x) - lo)
            want += length * v
        np.testing.assert_allclose(cumulative_average(g, x), want / x, rtol=1e-13, atol=1e-15)
    with pytest.raises(ValueError):
        cumulative_average(g, 0.0)


@pytest.mark.parametrize("p,weight", [(1.5, Weight.DX_OVER_X), (2.0, Weight.DX), (3.3, Weight.DX)])
def test_avg_power_against_quad(p, weight):
    g = _random_step(1)
    got = integral_avg_power(g, p, weight)
    for i, j in [(0, 0), (0, 1), (1, 1)]:
        want = _avg_power_entry(g, p, weight, i, j)
        assert got[i, j] == pytest.approx(want, rel=1e-8, abs=1e-10)


def test_integral_power_exact():
    g = _random_step(2)
    for weight in Weight:
        got = integral_power(g, 1.5, weight)
        want = np.zeros((2, 2))
        for lo, hi, v in zip(g.breakpoints[:-1], g.breakpoints[1:], g.values):
            w, u = np.linalg.eigh(v)
            vp = (u * np.clip(w, 0, None) ** 1.5) @ u.T
            want += vp * (hi - lo if weight is Weight.DX else math.log(hi / lo))
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)


def test_fubini_at_p_one():
    for seed in range(5):
        g = _random_step(seed, dim=3, segments=5)
        lhs = integral_avg_power(g, 1.0)
        rhs = integral_power(g, 1.0)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())


def test_quadrature_doubling_is_stable():
    g = _random_step(3, dim=3, segments=6)
    for p in (1.2, 2.0, 5.0):
        a = integral_avg_power(g, p, Weight.DX_OVER_X)
        b = integral_avg_power(g, p, Weight.DX_OVER_X, QuadratureSpec().doubled())
        assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()


def test_checks_pass_on_random_functions():
    for seed in range(10):
        g = _random_step(seed, dim=3, segments=4)
        assert check_lemma_convexity(g, 1.0 + 0.1 * seed).passed
        assert check_lemma_tracial(g, 1.0 + 0.7 * seed).passed
        assert check_theorem_continuous(g, 1.05 + 0.095 * seed).passed
        assert check_theorem_continuous(g, 2.0 + 0.6 * seed, tracial=True).passed


def test_zero_function():
    g = StepOperatorFunction.zero(2)
    r = check_theorem_continuous(g, 2.0)
    assert r.passed and r.gap == 0.0
    assert r.ratio is None


def test_range_errors():
    g = _random_step(0)
    with pytest.raises(ValueError, match="check_lemma_tracial"):
        check_lemma_convexity(g, 2.5)
    with pytest.raises(ValueError):
        check_lemma_tracial(g, 0.5)
    with pytest.raises(ValueError, match="tracial=True"):
        check_theorem_continuous(g, 3.0)
    with pytest.raises(ValueError):
        check_theorem_continuous(g, 1.0, tracial=True)
    with pytest.raises(ValueError):
        integral_avg_power(g, 1.0, Weight.DX)


def test_validation():
    with pytest.raises(ValueError):
        StepOperatorFunction([1.0, 1.0], [[[1.0]]])
    with pytest.raises(ValueError):
        StepOperatorFunction([0.0, 1.0], [[[1.0]]])
    with pytest.raises(ValueError):
        StepOperatorFunction([1.0, 2.0, 3.0], [[[1.0]]])
    with pytest.raises(NotPSDError, match="value 1"):
        StepOperatorFunction([1.0, 2.0, 3.0], [[[1.0]], [[-1.0]]])


def test_pairwise_sum_and_constant():
    x = np.arange(7.0)[:, None, None] * np.ones((7, 2, 2))
    np.testing.assert_array_equal(pairwise_sum(x), x.sum(axis=0))
    assert pairwise_sum(np.zeros((0, 2, 2))).shape == (2, 2)
    assert hardy_constant(2.0) == 4.0
