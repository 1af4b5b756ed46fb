"""Benchmark models: polynomial sum, Ishigami, varied-dimension function, truss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import prob
from .truss import TrussGeometry, default_geometry, truss_deflection


def poly_sum(X):
    """``1 + x1 + x1 x2 + x1 x2^2 + x1 x2^3``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x1, x2 = X[:, 0], X[:, 1]
    return 1.0 + x1 + x1 * x2 + x1 * x2**2 + x1 * x2**3


def ishigami(X, a=7.0, b=0.1):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    s1 = np.sin(X[:, 0])
    return s1 + a * np.sin(X[:, 1]) ** 2 + b * X[:, 2] ** 4 * s1


def varied_dim(X):
    """Test function whose dimension M is the number of columns (M >= 6)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M = X.shape[1]
    if M < 6:
        raise ValueError("varied_dim needs M >= 6")
    k = np.arange(1, M + 1)
    x = lambda i: X[:, i - 1]  # 1-based as in the usual statement of the function
    y = 3.0 + (k * (X**3 - 5.0 * X)).sum(axis=1) / M
    y += np.log((k * (X**2 + X**4)).sum(axis=1) / (3.0 * M))
    y += x(1) * x(2) ** 2 - x(3) * x(5) + x(2) * x(4) + x(M - 4) + x(M - 4) * x(M) ** 2
    return y


def ishigami_model():
    return prob.InputModel([prob.uniform(-math.pi, math.pi)] * 3)


def poly_sum_model():
    return prob.InputModel([prob.gaussian(0.0, 1.0), prob.gaussian(6.0, 1.0)])


def varied_dim_model(M):
    if M < 6:
        raise ValueError("varied_dim needs M >= 6")
    margs = [prob.uniform(1.0, 2.0)] * M
    if M >= 20:
        margs[19] = prob.uniform(1.0, 3.0)
    return prob.InputModel(margs)


def truss_model():
    """Ten independent inputs: E_h, E_o, A_h, A_o, P1..P6."""
    return prob.InputModel(
        [prob.lognormal(2.1e11, 2.1e10), prob.lognormal(2.1e11, 2.1e10),
         prob.lognormal(2.0e-3, 2.0e-4), prob.lognormal(1.0e-3, 1.0e-4)]
        + [prob.gumbel(5.0e4, 7.5e3)] * 6
    )


@dataclass
class BenchmarkModel:
    name: str
    input_model: prob.InputModel
    evaluate: Callable
    reference: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.input_model.dim


def ishigami_reference(a=7.0, b=0.1):
    from .sobol import analytic_ishigami

    return analytic_ishigami(a, b)


def get_benchmark(name: str, dim: int | None = None, geometry: TrussGeometry | None = None) -> BenchmarkModel:
    """Look up a benchmark by name: ``poly_sum``, ``ishigami``, ``varied_dim``, ``truss``."""
    if name == "poly_sum":
        return BenchmarkModel(name, poly_sum_model(), poly_sum)
    if name == "ishigami":
        return BenchmarkModel(name, ishigami_model(), ishigami, {"sobol": ishigami_reference()})
    if name == "varied_dim":
        M = dim or 11
        return BenchmarkModel("varied_dim", varied_dim_model(M), varied_dim)
    if name == "truss":
        geo = geometry or default_geometry()
        return BenchmarkModel(name, truss_model(), lambda X: truss_deflection(X, geo))
    raise KeyError(f"unknown benchmark {name!r}; known: {', '.join(BENCHMARKS)}")


BENCHMARKS = ("poly_sum", "ishigami", "varied_dim", "truss")
