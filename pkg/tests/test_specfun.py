import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from holodual.errors import ConvergenceError, DomainError
from holodual.specfun import (contiguity_raise_a, contiguity_raise_b, dawson, erf, gamma,
                              gauss_2f1, gauss_2f1_derivative, hermite_prob)

Z_GRID = np.round(np.arange(0.0, 0.9001, 0.05), 10)


@pytest.mark.parametrize("x, expected", [
    (1.0, 1.0), (0.5, math.sqrt(math.pi)), (2.5, 0.75 * math.sqrt(math.pi))])
def test_gamma_values(x, expected):
    assert gamma(x) == pytest.approx(expected, rel=1e-14)


@given(st.floats(0.1, 20.0))
def test_gamma_recurrence(x):
    assert gamma(x + 1) == pytest.approx(x * gamma(x), rel=1e-12)


def test_gamma_poles():
    with pytest.raises(DomainError):
        gamma(-2.0)


def test_2f1_at_zero_is_one():
    assert gauss_2f1(1, 1, 0.5, 0.0) == 1.0


def test_2f1_examples():
    assert gauss_2f1(1, 0.5, 0.5, 0.5) == pytest.approx(2.0, rel=1e-13)
    rhs = (1 + 0.5 * math.asin(0.5) / math.sqrt(0.75)) / 0.75
    assert gauss_2f1(1, 1, 0.5, 0.25) == pytest.approx(rhs, rel=1e-13)
    assert gauss_2f1(1.5, 1.5, 1.5, 0.5) == pytest.approx(0.5 ** -1.5, rel=1e-13)


@pytest.mark.parametrize("z", Z_GRID)
def test_2f1_closed_identities(z):
    for m in range(0, 4):
        # 2F1((1+m)/2, 1/2; 1/2; z) = (1-z)^{-(1+m)/2}
        assert gauss_2f1((1 + m) / 2, 0.5, 0.5, z) == pytest.approx((1 - z) ** (-(1 + m) / 2),
                                                                    rel=1e-11)
    s = math.sqrt(z)
    rhs = (1 + s * math.asin(s) / math.sqrt(1 - z)) / (1 - z)
    assert gauss_2f1(1, 1, 0.5, z) == pytest.approx(rhs, rel=1e-11)
    assert gauss_2f1(1.5, 1.5, 1.5, z) == pytest.approx((1 - z) ** -1.5, rel=1e-11)


@pytest.mark.parametrize("z", [0.8, 0.9, 0.99, 0.999])
def test_2f1_euler_branch_near_one(z):
    assert gauss_2f1(1.5, 0.5, 0.5, z) == pytest.approx((1 - z) ** -1.5, rel=1e-12)


def test_2f1_domain_and_cap():
    with pytest.raises(DomainError):
        gauss_2f1(1, 1, 0.5, 1.0)
    with pytest.raises(DomainError):
        gauss_2f1(1, 1, -2.0, 0.3)
    with pytest.raises(ConvergenceError):
        gauss_2f1(0.3, 0.7, 0.4, 0.7, max_terms=5)


def test_2f1_derivative_by_differences():
    z, h = 0.4, 1e-6
    fd = (gauss_2f1(1, 1, 0.5, z + h) - gauss_2f1(1, 1, 0.5, z - h)) / (2 * h)
    assert gauss_2f1_derivative(1, 1, 0.5, z) == pytest.approx(fd, rel=1e-8)


@pytest.mark.parametrize("z", [0.0, 0.3, 0.5, 0.7])
def test_contiguity_relations(z):
    a, b = 0.5, 0.5
    F, dF = gauss_2f1(a, b, 0.5, z), gauss_2f1_derivative(a, b, 0.5, z)
    assert contiguity_raise_a(a, b, z, F, dF) == pytest.approx(gauss_2f1(1.5, 0.5, 0.5, z),
                                                               rel=1e-12)
    assert contiguity_raise_b(a, b, z, F, dF) == pytest.approx(gauss_2f1(0.5, 1.5, 0.5, z),
                                                               rel=1e-12)


def test_contiguity_half_point_value():
    F, dF = gauss_2f1(0.5, 0.5, 0.5, 0.5), gauss_2f1_derivative(0.5, 0.5, 0.5, 0.5)
    assert contiguity_raise_a(0.5, 0.5, 0.5, F, dF) == pytest.approx(2 * math.sqrt(2), rel=1e-12)


def test_erf_values():
    assert erf(0.0) == 0.0
    assert erf(10.0) == pytest.approx(1.0, abs=1e-15)
    oracle = 2 / math.sqrt(math.pi) * integrate.quad(lambda t: math.exp(-t * t), 0, 1)[0]
    assert erf(1.0) == pytest.approx(oracle, rel=1e-13)


def test_dawson_values():
    assert dawson(0.0) == 0.0
    x = 1 / math.sqrt(2)
    oracle = math.exp(-x * x) * integrate.quad(lambda t: math.exp(t * t), 0, x)[0]
    assert dawson(x) == pytest.approx(oracle, rel=1e-13)
    assert dawson(-0.3) == -dawson(0.3)


@given(st.floats(-4.0, 4.0))
def test_dawson_ode(x):
    h = 1e-5
    d = (dawson(x + h) - dawson(x - h)) / (2 * h)
    assert d == pytest.approx(1 - 2 * x * dawson(x), abs=1e-6)


def test_hermite_values():
    assert hermite_prob(2, 3.0) == 8.0
    assert hermite_prob(0, 5.0) == 1.0
    assert hermite_prob(3, 2.0) == 2.0


def test_hermite_orthogonality():
    t, w = np.polynomial.hermite_e.hermegauss(64)
    for m in range(11):
        for n in range(11):
            val = np.sum(w * hermite_prob(m, t) * hermite_prob(n, t)) / math.sqrt(2 * math.pi)
            assert val == pytest.approx(math.factorial(n) if m == n else 0.0, abs=1e-8)
