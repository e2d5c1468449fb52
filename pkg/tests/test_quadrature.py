import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from holodual.activators import GELU, HEAVISIDE, RELU, RESIN, Activator
from holodual.dualact import Covariance2, XPoint, gelu_ff_closed, heaviside_closed, relu_closed
from holodual.errors import DomainError
from holodual.quadrature import (degenerate_expectation, expectation_quadrature,
                                 gauss_hermite_rule, gauss_legendre_rule,
                                 gelu_special_values_check, unnormalized_quadrature)
from holodual.specfun import erf

from helpers import random_sigmas

ONE = lambda u: np.ones_like(u)  # noqa: E731
IDENT = lambda u: u  # noqa: E731


def test_gauss_hermite_small_rules():
    r1 = gauss_hermite_rule(1)
    assert r1.nodes == pytest.approx([0.0]) and r1.weights == pytest.approx([math.sqrt(math.pi)])
    r2 = gauss_hermite_rule(2)
    assert sorted(r2.nodes) == pytest.approx([-1 / math.sqrt(2), 1 / math.sqrt(2)], rel=1e-15)
    assert r2.weights == pytest.approx([math.sqrt(math.pi) / 2] * 2, rel=1e-15)


def test_gauss_hermite_moment():
    r = gauss_hermite_rule(64)
    assert np.sum(r.weights * r.nodes ** 2) == pytest.approx(math.sqrt(math.pi) / 2, abs=1e-14)


def test_gauss_legendre_integrates_polynomials():
    r = gauss_legendre_rule(8)
    assert np.sum(r.weights * r.nodes ** 14) == pytest.approx(2 / 15, rel=1e-14)


def test_rule_size_validation():
    with pytest.raises(DomainError):
        gauss_hermite_rule(0)


def test_expectation_examples():
    assert expectation_quadrature(RELU, RELU, Covariance2(1, 1, 0)).value == pytest.approx(
        1 / (2 * math.pi), abs=1e-9)
    assert expectation_quadrature(HEAVISIDE, HEAVISIDE, Covariance2(1, 1, 0.5)).value == \
        pytest.approx(1 / 3, abs=1e-9)
    f = Activator("gelu_f")
    x = XPoint(-1.0, 0.5, -1.0)
    assert unnormalized_quadrature(f, f, x).value == pytest.approx(gelu_ff_closed(x), rel=1e-9)


def test_closed_forms_random(rng):
    for s in random_sigmas(rng, 20):
        q = expectation_quadrature(RELU, RELU, s)
        assert q.converged
        assert q.value == pytest.approx(relu_closed(s.c1, s.c2, s.r), rel=1e-9)
        h = expectation_quadrature(HEAVISIDE, HEAVISIDE, s)
        assert h.value == pytest.approx(heaviside_closed(s.r), rel=1e-9)


def test_normalization(rng):
    for s in random_sigmas(rng, 50, det_range=(1e-3, 4.0)):
        assert expectation_quadrature(ONE, ONE, s).value == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(-0.99, 0.99))
def test_mean_zero(c1, c2, r):
    assert expectation_quadrature(IDENT, ONE, Covariance2(c1, c2, r)).value == pytest.approx(
        0.0, abs=1e-12)


def test_degenerate_examples():
    assert degenerate_expectation(RELU, RELU, np.ones((2, 2))).value == pytest.approx(0.5, abs=1e-12)
    assert degenerate_expectation(HEAVISIDE, HEAVISIDE, np.ones((2, 2))).value == pytest.approx(
        0.5, abs=1e-12)
    anti = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert degenerate_expectation(HEAVISIDE, HEAVISIDE, anti).value == pytest.approx(0.0, abs=1e-12)


def test_degenerate_rejects_full_rank():
    with pytest.raises(DomainError):
        degenerate_expectation(RELU, RELU, np.eye(2))


def test_degenerate_limit_continuity():
    eps = 1e-4
    near = expectation_quadrature(RELU, RELU, Covariance2(1, 1, 1 - eps)).value
    limit = degenerate_expectation(RELU, RELU, np.ones((2, 2))).value
    assert near == pytest.approx(limit, abs=1e-3)


def test_resin_second_moment():
    # E[sin(z)^2 Y(z)] = (1 - e^{-2}) / 4
    v = degenerate_expectation(RESIN, RESIN, np.ones((2, 2))).value
    assert v == pytest.approx((1 - math.exp(-2)) / 4, rel=1e-12)


def test_gelu_special_values():
    report = gelu_special_values_check(1e-7)
    assert report["passed"]
    assert sorted(report["expected"].values()) == [0.0, 0.5, 1.0, math.pi]


def test_gelu_ode_residual():
    u = np.linspace(-3, 3, 100)
    h = 1e-4
    s = lambda t: t * (1 + erf(t))  # noqa: E731
    d1 = (s(u + h) - s(u - h)) / (2 * h)
    d2 = (s(u + h) - 2 * s(u) + s(u - h)) / h ** 2
    res = u ** 2 * d2 - 2 * u * (1 - u ** 2) * d1 + 2 * (1 - u ** 2) * s(u)
    assert np.max(np.abs(res)) <= 1e-5
    assert np.allclose(GELU(u), s(u))


def test_gelu_quadrature_vs_closed(rng):
    f = Activator("gelu_f")
    for s in random_sigmas(rng, 20):
        from holodual.dualact import normalize, x_from_sigma
        x = x_from_sigma(s)
        q = expectation_quadrature(f, f, s).value
        assert q == pytest.approx(normalize(gelu_ff_closed(x), x), abs=1e-7)
