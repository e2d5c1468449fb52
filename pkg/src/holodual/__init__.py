"""Expectations ``E[s1(u) s2(v)]`` over bivariate normals and the NTK kernels built on them."""

from .activators import GELU, HEAVISIDE, RELU, RESIN, Activator, parse_activator
from .backends import BACKENDS, make_backend
from .dualact import X0, Covariance2, XPoint, heaviside_closed, relu_closed
from .ntk import NtkConfig, NTKRegressor, kernel_matrix, krr_fit, krr_predict, theta

__version__ = "0.1.0"

__all__ = [
    "Activator", "parse_activator", "RELU", "HEAVISIDE", "GELU", "RESIN",
    "BACKENDS", "make_backend", "X0", "Covariance2", "XPoint", "relu_closed",
    "heaviside_closed", "NtkConfig", "NTKRegressor", "kernel_matrix", "krr_fit",
    "krr_predict", "theta",
]
