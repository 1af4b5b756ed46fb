"""Total-degree multi-index sets and tensorized orthonormal polynomial bases.

Multi-index sets are stored as integer arrays of shape ``(P, M)``; row ``j``
is the multi-index of column ``j`` of the design matrix. The canonical order
(graded lexicographic: ascending total degree, then ascending lexicographic)
is what greedy rankers use to break ties.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

MAX_DEGREE = 30
FAMILIES = ("hermite", "legendre")
MAX_CARDINALITY = 50_000_000


class BasisSizeError(ValueError):
    pass


def cardinality(M: int, p: int) -> int:
    """Number of multi-indices of total degree <= p in M dimensions."""
    return math.comb(p + M, p)


def enumerate_total_degree(M: int, p: int) -> np.ndarray:
    """All ``alpha`` in N^M with ``sum(alpha) <= p`` in graded-lex order.

    The returned array is cached and read-only.
    """
    if M < 1 or p < 0:
        raise ValueError("need M >= 1 and p >= 0")
    count = cardinality(M, p)
    if count > MAX_CARDINALITY:
        raise BasisSizeError(f"total-degree set with M={M}, p={p} has {count} terms")
    return _enumerate(M, p)


@lru_cache(maxsize=64)
def _enumerate(M, p):
    out = np.zeros((cardinality(M, p), M), dtype=np.int32)
    row = 1
    for d in range(1, p + 1):
        combos = np.array(list(combinations_with_replacement(range(M), d)), dtype=np.intp)
        block = np.zeros((len(combos), M), dtype=np.int32)
        rows = np.arange(len(combos))
        for s in range(d):
            np.add.at(block, (rows, combos[:, s]), 1)
        # sorted multisets come out in descending lex order of alpha
        out[row : row + len(block)] = block[::-1]
        row += len(block)
    out.flags.writeable = False
    return out


def graded_lex_key(alpha) -> tuple:
    alpha = tuple(int(a) for a in alpha)
    return (sum(alpha),) + alpha


def graded_lex_id(alpha) -> int:
    """Position of ``alpha`` in :func:`enumerate_total_degree` order (0-based)."""
    alpha = [int(a) for a in alpha]
    M, d = len(alpha), sum(alpha)
    pos = cardinality(M, d - 1) if d > 0 else 0
    rem = d
    for i in range(M - 1):
        parts = M - i - 1
        for v in range(alpha[i]):
            pos += math.comb(rem - v + parts - 1, parts - 1)
        rem -= alpha[i]
    return pos


def sort_graded_lex(alphas: np.ndarray) -> np.ndarray:
    """Permutation putting ``alphas`` in graded-lex order."""
    alphas = np.asarray(alphas)
    keys = [alphas[:, i] for i in range(alphas.shape[1] - 1, -1, -1)]
    keys.append(alphas.sum(axis=1))
    return np.lexsort(keys)


def _check_family(family):
    if family not in FAMILIES:
        raise ValueError(f"unknown polynomial family {family!r}")


def univariate_table(family: str, degree: int, xi) -> np.ndarray:
    """Orthonormal polynomials of degrees 0..degree at ``xi``.

    Returns an array of shape ``xi.shape + (degree + 1,)``. Hermite
    polynomials are orthonormal under N(0, 1), Legendre under U(-1, 1).
    """
    _check_family(family)
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"degree must lie in [0, {MAX_DEGREE}]")
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree == 0:
        return out
    if family == "hermite":
        out[..., 1] = xi
        for n in range(1, degree):
            out[..., n + 1] = (xi * out[..., n] - math.sqrt(n) * out[..., n - 1]) / math.sqrt(n + 1)
    else:
        out[..., 1] = math.sqrt(3.0) * xi
        for n in range(1, degree):
            # (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}, with psi_n = sqrt(2n+1) P_n
            a = math.sqrt((2 * n + 1) * (2 * n + 3)) / (n + 1)
            b = n * math.sqrt(2 * n + 3) / ((n + 1) * math.sqrt(2 * n - 1))
            out[..., n + 1] = a * xi * out[..., n] - b * out[..., n - 1]
    return out


def eval_univariate(family: str, degree: int, xi):
    return univariate_table(family, degree, xi)[..., degree]


class BasisSpec:
    """Polynomial families per dimension plus an ordered active set."""

    def __init__(self, families, alphas):
        self.families = list(families)
        for f in self.families:
            _check_family(f)
        alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int32))
        if alphas.size == 0:
            alphas = alphas.reshape(0, len(self.families))
        if alphas.shape[1] != len(self.families):
            raise ValueError("multi-index length differs from number of families")
        if np.any(alphas < 0):
            raise ValueError("multi-indices must be non-negative")
        if len({tuple(a) for a in alphas.tolist()}) != len(alphas):
            raise ValueError("duplicate multi-indices in active set")
        self.alphas = alphas

    def __len__(self):
        return len(self.alphas)

    def design_matrix(self, xi) -> np.ndarray:
        return design_matrix(self.families, self.alphas, xi)


def design_matrix(families, alphas, xi) -> np.ndarray:
    """Evaluate ``Psi[n, j] = prod_i pi_{alpha_ji}(xi_ni)``.

    Only non-zero entries of each multi-index contribute a factor, so the
    cost scales with the number of active dimensions per column rather than M.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    alphas = np.atleast_2d(np.asarray(alphas))
    M = len(families)
    if xi.shape[1] != M or (alphas.size and alphas.shape[1] != M):
        raise ValueError(f"shape mismatch: xi {xi.shape}, alphas {alphas.shape}, M={M}")
    N, P = xi.shape[0], alphas.shape[0]
    psi = np.ones((N, P))
    if P == 0 or N == 0:
        return psi
    for i, fam in enumerate(families):
        col = alphas[:, i]
        nz = np.flatnonzero(col)
        if nz.size == 0:
            continue
        table = univariate_table(fam, int(col.max()), xi[:, i])
        psi[:, nz] *= table[:, col[nz]]
    return psi


def alphas_to_json(alphas) -> str:
    return json.dumps(np.asarray(alphas).astype(int).tolist())


def alphas_from_json(text: str) -> np.ndarray:
    return np.asarray(json.loads(text), dtype=np.int32)
