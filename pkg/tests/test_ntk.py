import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from holodual.activators import GELU, HEAVISIDE, RELU, RESIN, Activator, parse_activator
from holodual.backends import (ClosedBackend, HermiteBackend, HgmBackend, HybridBackend,
                               QuadratureBackend, make_backend)
from holodual.dualact import Covariance2, heaviside_closed, relu_closed
from holodual.errors import ClosedFormUnavailable, DomainError, MissingPfaffianError
from holodual.experiments import learn_sin_data
from holodual.ntk import (NtkConfig, NTKRegressor, c_sigma, kernel_error, kernel_matrix, krr_fit,
                          krr_predict, theta)
from holodual.quadrature import degenerate_expectation

from helpers import random_sigmas


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


# -- backends --------------------------------------------------------------------

def test_backends_agree_on_relu_and_heaviside(rng):
    sig = random_sigmas(rng, 30, det_range=(1e-2, 2.0))
    s11 = np.array([s.c1 ** 2 for s in sig])
    s22 = np.array([s.c2 ** 2 for s in sig])
    s12 = np.array([s.c1 * s.c2 * s.r for s in sig])
    relu = np.array([relu_closed(s.c1, s.c2, s.r) for s in sig])
    heavi = np.array([heaviside_closed(s.r) for s in sig])
    for name in ("closed", "quadrature", "hgm", "aao", "hybrid"):
        b = make_backend(name)
        assert b.expectations(RELU, RELU, s11, s12, s22) == pytest.approx(relu, rel=1e-7)
        assert b.expectations(HEAVISIDE, HEAVISIDE, s11, s12, s22) == pytest.approx(heavi, rel=1e-7)
    herm = HermiteBackend(terms=200)
    assert herm.expectations(RELU, RELU, s11, s12, s22) == pytest.approx(relu, abs=2e-3)


def test_degenerate_and_near_degenerate_routing():
    b = make_backend("hgm")
    s = np.array([2.0, 2.0, 1.0, 0.0])
    s12 = np.array([2.0, -2.0, 1.0 - 1e-7, 0.0])
    s22 = np.array([2.0, 2.0, 1.0, 3.0])
    vals = b.expectations(HEAVISIDE, HEAVISIDE, s, s12, s22)
    assert vals[0] == pytest.approx(0.5, abs=1e-13) and vals[1] == pytest.approx(0.0, abs=1e-15)
    assert vals[2] == pytest.approx(heaviside_closed(1 - 1e-7), abs=1e-9)
    assert vals[3] == 0.0  # sigma(0) sigma(v) with Y(0) = 0


def test_rounded_unit_correlation_snaps_exactly():
    # s12 / (c1 c2) rounds to 1 - 2e-16 here; arccos would turn that into 3e-9
    c = ClosedBackend()
    assert c.expectations(HEAVISIDE, HEAVISIDE, [2.0], [2.0], [2.0])[0] == 0.5


def test_closed_backend_reports_missing_forms():
    with pytest.raises(ClosedFormUnavailable, match="closed form NA"):
        ClosedBackend().expectations(RESIN, RESIN, [1.0], [0.3], [1.0])
    with pytest.raises(MissingPfaffianError):
        HgmBackend().expectations(RESIN, RESIN, [1.0], [0.3], [1.0])


def test_gelu_derivative_split():
    dot = GELU.derivative()
    sig = Covariance2(1.1, 0.8, 0.4)
    q = QuadratureBackend().expectation(dot, dot, sig)
    h = HgmBackend().expectation(dot, dot, sig)
    assert h == pytest.approx(q, rel=1e-8)


def test_hybrid_uses_hgm_without_closed_form():
    act = parse_activator("rmonomial:2")
    sig = Covariance2(1.0, 1.2, 0.3)
    assert HybridBackend().expectation(act, act, sig) == pytest.approx(
        QuadratureBackend().expectation(act, act, sig), rel=1e-8)


def test_unknown_backend():
    with pytest.raises(DomainError):
        make_backend("magic")


# -- c_sigma and theta ----------------------------------------------------------

def test_c_sigma_values():
    assert c_sigma(RELU) == pytest.approx(2.0, rel=1e-12)
    assert c_sigma(HEAVISIDE) == pytest.approx(2.0, rel=1e-12)
    assert c_sigma(RESIN) == pytest.approx(1 / degenerate_expectation(RESIN, RESIN, np.ones((2, 2))).value)
    with pytest.raises(DomainError):
        c_sigma(Activator("rpoly", (0.0,)))


def test_theta_examples():
    cfg = NtkConfig(layers=1, bias=0.0)
    x = unit([0.6, 0.8])
    assert theta(x, x, cfg) == pytest.approx(2.0, rel=1e-12)
    assert theta([1.0, 0.0], [0.0, 1.0], cfg) == pytest.approx(1 / math.pi, rel=1e-12)


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_theta_symmetric(a, b):
    cfg = NtkConfig(layers=2)
    assert theta(a, b, cfg) == theta(b, a, cfg)


def test_theta_backend_equivalence(rng):
    for _ in range(50):
        a, b = unit(rng.normal(size=3)), unit(rng.normal(size=3))
        layers = int(rng.integers(1, 4))
        bias = float(rng.choice([0.0, 1.0]))
        ref = theta(a, b, NtkConfig(layers=layers, bias=bias))
        for backend in ("hgm", "quadrature"):
            assert theta(a, b, NtkConfig(layers=layers, bias=bias, backend=backend)) == \
                pytest.approx(ref, abs=1e-6)


def test_diagonal_fixed_point():
    x = unit([1.0, -2.0, 0.5])
    for layers in (1, 2, 3, 4):
        # Theta(x, x) = L + 1 when every Sigma^(h)(x, x) = 1 and dSigma = 1
        assert theta(x, x, NtkConfig(layers=layers, bias=0.0)) == pytest.approx(layers + 1, rel=1e-12)


# -- kernel matrix and regression -------------------------------------------------

def test_kernel_matrix_shapes_and_duplicates():
    X = np.array([[0.3], [0.3], [-0.7]])
    H = kernel_matrix(X)
    assert H.shape == (3, 3) and np.array_equal(H, H.T)
    assert np.array_equal(H[0], H[1])
    assert kernel_matrix(X[:1])[0, 0] == pytest.approx(theta(X[0], X[0]))


def test_kernel_matrix_psd():
    X, _, _, _ = learn_sin_data()
    H = kernel_matrix(X)
    assert np.min(np.linalg.eigvalsh(H)) >= -1e-8 * np.linalg.norm(H)


def test_kernel_closed_vs_hgm_learn_sin():
    X, _, _, _ = learn_sin_data()
    H1 = kernel_matrix(X, cfg=NtkConfig(backend="closed"))
    H2 = kernel_matrix(X, cfg=NtkConfig(backend="hgm"))
    assert kernel_error(H1, H2) <= 1e-6


def test_kernel_rejects_bad_input():
    with pytest.raises(DomainError):
        kernel_matrix(np.array([[np.nan]]))
    with pytest.raises(DomainError):
        kernel_matrix(np.ones((2, 2)), np.ones((2, 3)))


def test_krr_scalar_case():
    model = krr_fit([[1.0]], [1.0], ridge=0.01, kernel=np.array([[2.0]]))
    assert model.alpha == pytest.approx([1 / 2.01])
    with pytest.raises(DomainError):
        krr_fit([[1.0]], [1.0], ridge=0.0)


def test_krr_single_point_prediction():
    x1, y1, x = np.array([[0.4]]), np.array([0.7]), np.array([[-0.2]])
    model = krr_fit(x1, y1, ridge=0.05)
    k = kernel_matrix(x, x1)[0, 0]
    k11 = kernel_matrix(x1)[0, 0]
    assert krr_predict(model, x)[0] == pytest.approx(k * y1[0] / (k11 + 0.05), rel=1e-12)


def test_krr_limits():
    X, y, _, _ = learn_sin_data()
    tiny = krr_fit(X, y, ridge=1e-9)
    assert krr_predict(tiny, X[3:4])[0] == pytest.approx(y[3], abs=1e-4)
    huge = krr_fit(X, y, ridge=1e9)
    assert np.max(np.abs(krr_predict(huge, X))) < 1e-6


def test_learn_sin_odd_symmetry():
    X, y, _, _ = learn_sin_data()
    model = krr_fit(X, y, NtkConfig(bias=0.0))
    assert abs(krr_predict(model, [[0.0]])[0]) < 1e-10
    assert math.isfinite(model.condition_number)


def test_estimator_api():
    X, y, Xt, yt = learn_sin_data()
    est = NTKRegressor(alpha=0.01).fit(X, y)
    assert est.predict(Xt) == pytest.approx(krr_predict(krr_fit(X, y), Xt))
    assert est.score(Xt, yt) > 0.99
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(ValueError):
        est.predict(np.ones((2, 2)))
