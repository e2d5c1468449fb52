import math
import time
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from holodual.dualact import Covariance2, relu_closed
from holodual.errors import DomainError, RationalOverflowError
from holodual.hermite import (ExactCoefficient, coefficients_csv, heaviside_recurrence,
                              hermite_dual, realize, recurrence_for, recurrence_residuals,
                              relu_recurrence, resin_recurrence, run_recurrence)
from holodual.specfun import hermite_prob


@pytest.fixture(autouse=True)
def _quiet_quad():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        yield


def oracle(fn, n):
    """``int_0^inf fn(u) He_n(u) exp(-u^2/2) du`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda u: fn(u) * hermite_prob(n, u) * math.exp(-u * u / 2), 0,
                            np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def test_relu_first_values():
    cs = realize(run_recurrence(relu_recurrence(), 8))
    expected = [1, math.sqrt(math.pi / 2), 1, 0, -1, 0, 3, 0, -15]
    assert [float(c) for c in cs] == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("n", range(0, 12))
def test_relu_against_quadrature(n):
    c = float(run_recurrence(relu_recurrence(), max(n, 2))[n])
    assert c == pytest.approx(oracle(lambda u: u, n), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("n", range(0, 12))
def test_heaviside_against_quadrature(n):
    c = float(run_recurrence(heaviside_recurrence(), max(n, 2))[n])
    assert c == pytest.approx(oracle(lambda u: 1.0, n), rel=1e-9, abs=1e-9)


def test_resin_initial_and_identities():
    cs = run_recurrence(resin_recurrence(), 10)
    assert float(cs[0]) == pytest.approx(0.7248, abs=1e-4)
    assert cs[3] == -cs[1]
    assert cs[6] == cs[4].scale(-6) + cs[2].scale(-7) + cs[0].scale(-2)


def test_resin_against_quadrature():
    cs = realize(run_recurrence(resin_recurrence(), 20))
    for n, c in enumerate(cs):
        ref = oracle(math.sin, n)
        assert float(c) == pytest.approx(ref, rel=1e-8, abs=1e-8 * math.sqrt(math.factorial(n)))


def test_resin_hundred_terms_fast():
    t0 = time.perf_counter()
    cs = realize(run_recurrence(resin_recurrence(), 100))
    assert time.perf_counter() - t0 < 1.0
    assert len(cs) == 101 and all(mpmath.isfinite(c) for c in cs)


def test_order_precondition():
    with pytest.raises(DomainError):
        run_recurrence(relu_recurrence(), 1)
    with pytest.raises(DomainError):
        recurrence_for("gelu")


def test_rational_overflow_guard():
    with pytest.raises(RationalOverflowError):
        run_recurrence(resin_recurrence(), 200, max_bits=64)


def test_relu_lattice_and_residuals():
    rec = relu_recurrence()
    cs = run_recurrence(rec, 60)
    for c in cs:
        assert set(c.as_dict()) <= {"ONE", "SQRT_PI_OVER_2"}
        assert all(v.denominator == 1 for v in c.as_dict().values())
    assert all(r.is_zero() for r in recurrence_residuals(rec, cs))


def test_resin_parity_and_residuals():
    rec = resin_recurrence()
    cs = run_recurrence(rec, 60)
    for n, c in enumerate(cs):
        allowed = {"ONE", "SQRT2_DAWSON"} if n % 2 == 0 else {"SQRT_PI_OVER_2E"}
        assert set(c.as_dict()) <= allowed
    assert all(r.is_zero() for r in recurrence_residuals(rec, cs))


@given(st.dictionaries(st.sampled_from(["ONE", "SQRT_PI_OVER_2", "SQRT2_DAWSON"]),
                       st.fractions(max_denominator=50), max_size=3),
       st.fractions(max_denominator=50))
def test_exact_coefficient_algebra(parts, q):
    a = ExactCoefficient.of(**parts)
    assert (a + (-a)).is_zero()
    assert float(a.scale(q)) == pytest.approx(float(q) * float(a), rel=1e-12, abs=1e-12)


def test_exact_text():
    assert str(ExactCoefficient.of(ONE=5, SQRT2_DAWSON=-1)) == "5 - sqrt(2)*F(1/sqrt(2))"
    assert str(ExactCoefficient()) == "0"


def test_csv_dump():
    with mpmath.workprec(200):
        root = float(mpmath.sqrt(mpmath.pi / 2))
    text = coefficients_csv(run_recurrence(relu_recurrence(), 3))
    assert text.splitlines() == ["n,exact,numeric", "0,1,1.0", f"1,sqrt(pi/2),{root!r}",
                                 "2,1,1.0", "3,0,0.0"]


def test_hermite_dual_examples():
    cs = run_recurrence(relu_recurrence(), 200)
    val, _ = hermite_dual(cs, 1, Covariance2(1, 1, 0.0))
    assert val == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    val, _ = hermite_dual(cs, 1, Covariance2(1, 1, 0.5), terms=100)
    assert val == pytest.approx(relu_closed(1, 1, 0.5), abs=1e-6)
    for r in (0.25, 0.5, 0.75):
        val, _ = hermite_dual(cs, 1, Covariance2(1, 1, r), terms=200)
        assert val == pytest.approx(relu_closed(1, 1, r), abs=1e-4)


def test_hermite_dual_at_r_one_increases_to_half():
    cs = run_recurrence(relu_recurrence(), 400)
    partial = [hermite_dual(cs, 1, Covariance2(1, 1, 1.0), terms=t)[0] for t in (0, 1, 2, 50, 400)]
    assert partial[:3] == pytest.approx([1 / (2 * math.pi), 0.409, 0.489], abs=1e-3)
    assert all(a <= b for a, b in zip(partial, partial[1:]))
    assert 0.49 < partial[-1] < 0.5


def test_hermite_dual_homogeneity():
    cs = run_recurrence(relu_recurrence(), 200)
    base, _ = hermite_dual(cs, 1, Covariance2(1, 1, 0.3))
    scaled, _ = hermite_dual(cs, 1, Covariance2(2, 0.5, 0.3))
    assert scaled == pytest.approx(base, rel=1e-14)
    with pytest.raises(DomainError):
        hermite_dual(cs, 1, Covariance2(1, 1, 0.3), terms=500)
