"""Frobenius structure of finite exponential families, checked numerically."""

from .errors import StatFrobError
from .expfam import ExponentialFamily, bernoulli, build_family, categorical, random_family

__all__ = [
    "ExponentialFamily",
    "StatFrobError",
    "bernoulli",
    "build_family",
    "categorical",
    "random_family",
]

__version__ = "0.1.0"
