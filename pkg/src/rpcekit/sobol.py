"""Sobol sensitivity indices from PCE coefficients, plus a Monte-Carlo check."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .prob import InputModel


class UndefinedIndicesError(ValueError):
    pass


@dataclass
class SobolIndices:
    """First-order, total and partial (interaction) indices.

    ``interactions`` maps a sorted tuple of 0-based variable indices to its
    partial index; subsets that do not occur are implicitly zero.
    ``first_order_se`` and ``total_se`` are set by Monte-Carlo estimates.
    """

    first_order: np.ndarray
    total: np.ndarray
    interactions: dict
    variance: float
    first_order_se: np.ndarray | None = None
    total_se: np.ndarray | None = None
    zero_variance: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.first_order)

    def partial(self, subset) -> float:
        return float(self.interactions.get(tuple(sorted(subset)), 0.0))

    def to_csv(self) -> str:
        """Rows ``subset, S, S_total``; subsets are 1-based, space separated."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subset", "S", "S_total"])
        keys = set(self.interactions) | {(i,) for i in range(self.dim)}
        for u in sorted(keys, key=lambda u: (len(u), u)):
            s = self.first_order[u[0]] if len(u) == 1 else self.partial(u)
            st = repr(float(self.total[u[0]])) if len(u) == 1 else ""
            w.writerow([" ".join(str(i + 1) for i in u), repr(float(s)), st])
        return buf.getvalue()


def indices_from_pce(model) -> SobolIndices:
    """Variance decomposition read off the squared coefficients.

    Requires an orthonormal basis, which every model built by this package
    has.
    """
    alphas = np.asarray(model.alphas)
    beta = np.asarray(model.beta, dtype=float)
    nonconst = alphas.sum(axis=1) > 0
    b2 = beta**2
    D = float(b2[nonconst].sum())
    if D <= 0:
        raise UndefinedIndicesError("model has zero variance; Sobol indices are undefined")
    M = alphas.shape[1]
    parts = {}
    for a, v in zip(alphas[nonconst], b2[nonconst]):
        u = tuple(int(i) for i in np.flatnonzero(a))
        parts[u] = parts.get(u, 0.0) + float(v)
    inter = {u: v / D for u, v in parts.items()}
    first = np.array([inter.get((i,), 0.0) for i in range(M)])
    total = np.array([b2[nonconst & (alphas[:, i] > 0)].sum() / D for i in range(M)])
    return SobolIndices(first, total, inter, D)


def analytic_ishigami(a: float = 7.0, b: float = 0.1) -> SobolIndices:
    """Closed-form indices of ``sin x1 + a sin^2 x2 + b x3^4 sin x1`` on [-pi, pi]^3."""
    pi4, pi8 = math.pi**4, math.pi**8
    D1 = b * pi4 / 5 + b**2 * pi8 / 50 + 0.5
    D2 = a**2 / 8
    D13 = 8 * b**2 * pi8 / 225
    D = a**2 / 8 + b * pi4 / 5 + b**2 * pi8 / 18 + 0.5
    inter = {(0,): D1 / D, (1,): D2 / D, (2,): 0.0, (0, 1): 0.0, (0, 2): D13 / D,
             (1, 2): 0.0, (0, 1, 2): 0.0}
    first = np.array([D1, D2, 0.0]) / D
    total = np.array([D1 + D13, D2, D13]) / D
    return SobolIndices(first, total, inter, D)


def mc_sobol(func, input_model: InputModel, n: int = 10_000, seed=0) -> SobolIndices:
    """Pick-freeze estimates of first-order and total indices.

    ``func`` maps an (n, M) array of physical inputs to n responses; a
    fitted model's ``predict`` works as well as the model itself. Uses the
    Saltelli first-order and Jansen total estimators on ``n (M + 2)``
    evaluations. A constant response sets ``zero_variance`` and NaN indices.
    """
    if hasattr(func, "predict"):
        func = func.predict
    M = input_model.dim
    rng = np.random.default_rng(seed)
    u = rng.random((2, n, M))
    A = np.column_stack([m.quantile(u[0, :, i]) for i, m in enumerate(input_model.marginals)])
    B = np.column_stack([m.quantile(u[1, :, i]) for i, m in enumerate(input_model.marginals)])
    fA = np.asarray(func(A), dtype=float).ravel()
    fB = np.asarray(func(B), dtype=float).ravel()
    D = float(np.var(np.concatenate([fA, fB]), ddof=1))
    if not D > 0:
        nan = np.full(M, np.nan)
        return SobolIndices(nan, nan.copy(), {}, 0.0, nan.copy(), nan.copy(), zero_variance=True)
    first, total, se1, set_ = (np.empty(M) for _ in range(4))
    for i in range(M):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        fAB = np.asarray(func(ABi), dtype=float).ravel()
        t1 = fB * (fAB - fA)
        tt = 0.5 * (fA - fAB) ** 2
        first[i], total[i] = t1.mean() / D, tt.mean() / D
        se1[i] = t1.std(ddof=1) / math.sqrt(n) / D
        set_[i] = tt.std(ddof=1) / math.sqrt(n) / D
    inter = {(i,): float(first[i]) for i in range(M)}
    return SobolIndices(first, total, inter, D, se1, set_)
