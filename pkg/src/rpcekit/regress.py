"""Least-squares fits, closed-form leave-one-out error and R^2."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

# leverage at or above this makes the closed-form LOO error meaningless
LEVERAGE_LIMIT = 1.0 - 1e-8
# relative size of a QR pivot below which a column counts as dependent
RANK_TOL = 1e-10


class UndefinedMetricError(ValueError):
    pass


@dataclass
class FitResult:
    beta: np.ndarray
    eps_loo: float
    leverage: np.ndarray
    cond_flag: bool
    rank: int


def _loo_from(y, fitted, h):
    if np.any(h > LEVERAGE_LIMIT):
        return np.inf
    return float(np.mean(((y - fitted) / (1.0 - h)) ** 2))


def ols_fit(psi, y) -> FitResult:
    """Ordinary least squares via a thin QR factorization.

    Rank-deficient designs fall back to the minimum-norm solution (SVD) and
    set ``cond_flag``; callers decide whether to reject such fits.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    N, P = psi.shape
    if y.shape[0] != N:
        raise ValueError("psi and y have different numbers of rows")
    if P == 0:
        h = np.zeros(N)
        return FitResult(np.zeros(0), _loo_from(y, np.zeros(N), h), h, False, 0)
    col_norm = np.linalg.norm(psi, axis=0)
    flag = P > N or np.any(col_norm == 0)
    if not flag:
        q, r = np.linalg.qr(psi)
        pivots = np.abs(np.diag(r))
        flag = bool(np.any(pivots <= RANK_TOL * col_norm))
    if not flag:
        qty = q.T @ y
        beta = _solve_upper(r, qty)
        h = np.einsum("ij,ij->i", q, q)
        fitted = q @ qty
        return FitResult(beta, _loo_from(y, fitted, h), h, False, P)
    u, s, vt = np.linalg.svd(psi, full_matrices=False)
    keep = s > RANK_TOL * s.max() if s.size and s.max() > 0 else np.zeros_like(s, dtype=bool)
    uk = u[:, keep]
    beta = vt[keep].T @ ((uk.T @ y) / s[keep])
    h = np.einsum("ij,ij->i", uk, uk)
    fitted = uk @ (uk.T @ y)
    return FitResult(beta, _loo_from(y, fitted, h), h, True, int(keep.sum()))


def _solve_upper(r, b):
    return solve_triangular(r, b, lower=False)


def loo_error(fit: FitResult, psi, y) -> float:
    """Closed-form leave-one-out error ``mean(((y - yhat) / (1 - h))**2)``.

    Returns ``inf`` when any leverage reaches ``1 - 1e-8``.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    fitted = psi @ fit.beta if fit.beta.size else np.zeros_like(y)
    return _loo_from(y, fitted, fit.leverage)


def loo_path(psi_ordered, y):
    """LOO errors of every prefix ``psi_ordered[:, :j]``, j = 1..J.

    One QR factorization serves all prefixes: the leading ``j`` columns of Q
    span the leading ``j`` columns of the design, so leverages and fitted
    values of each prefix are cumulative sums. The path is cut at the first
    numerically dependent column. Returns ``(eps, r, qty)``; ``eps[j-1]`` is
    the error of the j-term prefix (``inf`` when leverage hits 1).
    """
    psi = np.atleast_2d(np.asarray(psi_ordered, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    N, J = psi.shape
    J = min(J, N)
    if J == 0:
        return np.zeros(0), np.zeros((0, 0)), np.zeros(0)
    psi = psi[:, :J]
    q, r = np.linalg.qr(psi)
    col_norm = np.linalg.norm(psi, axis=0)
    bad = np.flatnonzero(np.abs(np.diag(r)) <= RANK_TOL * np.maximum(col_norm, 1e-300))
    if bad.size:
        J = int(bad[0])
        q, r = q[:, :J], r[:J, :J]
    if J == 0:
        return np.zeros(0), r, np.zeros(0)
    qty = q.T @ y
    h = np.cumsum(q * q, axis=1)
    fitted = np.cumsum(q * qty, axis=1)
    resid = y[:, None] - fitted
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = np.mean((resid / (1.0 - h)) ** 2, axis=0)
    eps[np.any(h > LEVERAGE_LIMIT, axis=0)] = np.inf
    return eps, r, qty


def prefix_coefficients(r, qty, j):
    """OLS coefficients of the j-term prefix from :func:`loo_path` output."""
    return _solve_upper(r[:j, :j], qty[:j])


def r_squared(y_true, y_pred) -> float:
    """``1 - MSE / Var(y_true)`` with the (N-1)-denominator variance."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError("length mismatch")
    if y_true.size < 2:
        raise UndefinedMetricError("R^2 needs at least two points")
    var = np.var(y_true, ddof=1)
    if var == 0:
        raise UndefinedMetricError("R^2 undefined for a constant reference")
    return float(1.0 - np.mean((y_true - y_pred) ** 2) / var)
