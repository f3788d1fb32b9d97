"""Multilevel transport solver for binary stochastic mixtures in slab geometry."""

__version__ = "0.1.0"

from .problem import MaterialSpec, ProblemSpec, TestId, build_test
from .quadrature import AngularQuadrature, build_double_gauss_legendre

__all__ = [
    "AngularQuadrature",
    "MaterialSpec",
    "ProblemSpec",
    "TestId",
    "build_double_gauss_legendre",
    "build_test",
    "__version__",
]
