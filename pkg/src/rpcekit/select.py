"""Greedy basis rankers: orthogonal matching pursuit and least angle regression.

Both rankers run on a *batch* of jobs sharing one dictionary ``psi`` (N x P).
A job is a row subset of the data plus a method (``"omp"`` or ``"lars"``).
The jobs advance in lockstep so each greedy step costs one matrix-matrix
product ``psi.T @ V`` instead of one matrix-vector product per job; this is
how the k-fold resampling builds stay affordable for large dictionaries.
Each job's result is identical to running it alone.

Correlations are scored on columns normalized to unit Euclidean norm over the
job's rows. LARS also centers the columns and the response over those rows;
constant columns carry no direction there and are put at the head of the
LARS ranking (the intercept is always part of the model). OMP can be switched to the raw ``|R^T psi|`` rule with
``normalize=False``. Ties go to the lowest column index, i.e. to the
graded-lex position of the multi-index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regress import RANK_TOL, loo_path

METHODS = ("omp", "lars")
# correlations below this fraction of the initial maximum are treated as zero
_ZERO_CORR = 1e-13
# target size of the (P x jobs) correlation block computed per product
_BLOCK_BYTES = 256 * 2**20


@dataclass
class RankedBasis:
    """Ranked dictionary columns with the LOO error of each prefix.

    ``order[j]`` is the column entering at rank ``j + 1``; ``eps_path[j]`` is
    the LOO error of the OLS fit on ``order[:j + 1]`` and ``delta_eps`` its
    increments (the error before the first entry counts as 0).
    """

    order: np.ndarray
    eps_path: np.ndarray
    delta_eps: np.ndarray

    def __len__(self):
        return len(self.order)


def _finish(order, psi, y, rows=None):
    order = np.asarray(order, dtype=np.intp)
    sub = psi[:, order] if rows is None else psi[np.ix_(rows, order)]
    yy = y if rows is None else y[rows]
    eps, _, _ = loo_path(sub, yy)
    order = order[: len(eps)]
    delta = np.diff(np.concatenate([[0.0], eps]))
    return RankedBasis(order, eps, delta)


def omp_rank(psi, y, j_max=None, normalize=True) -> RankedBasis:
    """Orthogonal matching pursuit ranking of the columns of ``psi``."""
    psi, y = _prepare(psi, y)
    order = rank_batch(psi, y, np.ones((1, len(y)), bool), ["omp"], j_max, normalize)[0]
    return _finish(order, psi, y)


def lars_rank(psi, y, j_max=None) -> RankedBasis:
    """Least angle regression entry order of the columns of ``psi``."""
    psi, y = _prepare(psi, y)
    order = rank_batch(psi, y, np.ones((1, len(y)), bool), ["lars"], j_max)[0]
    return _finish(order, psi, y)


def _prepare(psi, y):
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if psi.shape[0] != y.shape[0]:
        raise ValueError("psi and y have different numbers of rows")
    return psi, y


def default_j_max(n_rows, n_cols):
    return max(0, min(n_rows - 1, n_cols))


class _Job:
    def __init__(self, method, rows, y, norms, j_max, means=None):
        self.method = method
        self.rows = rows
        self.means = means
        self.norms = norms
        self.valid = norms > 0
        self.invalid = list(np.flatnonzero(~self.valid))  # excluded columns, grows with the order
        self.inv_norms = 1.0 / np.where(self.valid, norms, 1.0)
        self.score_inv = self.inv_norms
        self.j_max = j_max
        self.order = []
        self.done = j_max <= 0 or not self.valid.any()
        if means is not None:
            y = y - y[rows].mean()
        self.resid = np.where(rows, y, 0.0)
        # orthonormal vectors (OMP) or normalized active columns (LARS), one per column
        self.basis = np.zeros((len(rows), max(j_max, 0)))

    def vector(self):
        """Vector whose correlations with the dictionary are needed next."""
        if self.method == "omp" or not self.order:
            return self.resid
        return self.u


def _column(psi, j, job):
    col = psi[:, j] if job.means is None else psi[:, j] - job.means[j]
    return np.where(job.rows, col, 0.0) / job.norms[j]


def _omp_step(job, psi, corr):
    scores = np.abs(corr)
    scores *= job.score_inv
    scores[job.invalid] = -np.inf
    j = int(np.argmax(scores))
    if not np.isfinite(scores[j]):
        job.done = True
        return
    v = np.where(job.rows, psi[:, j], 0.0)
    vnorm = np.linalg.norm(v)
    Q = job.basis[:, : len(job.order)]
    for _ in range(2):  # Gram-Schmidt with one re-orthogonalization pass
        v -= Q @ (Q.T @ v)
    if np.linalg.norm(v) <= RANK_TOL * vnorm:
        job.done = True
        return
    q = v / np.linalg.norm(v)
    job.basis[:, len(job.order)] = q
    job.resid = job.resid - q * (q @ job.resid)
    job.order.append(j)
    job.valid[j] = False
    job.invalid.append(j)
    if len(job.order) >= job.j_max:
        job.done = True


def _lars_direction(job):
    s = job.signs
    ginv_s = job.ginv @ s
    norm2 = float(s @ ginv_s)
    if not norm2 > 0:
        return False
    job.A = 1.0 / np.sqrt(norm2)
    w = job.A * ginv_s * s
    job.u = job.basis[:, : len(s)] @ (s * w)
    return True


def _lars_add(job, psi, j, sign):
    x = _column(psi, j, job)
    k = len(job.order)
    if k:
        b = job.basis[:, :k].T @ x
        gb = job.ginv @ b
        schur = 1.0 - b @ gb
        if schur <= RANK_TOL:
            return False
        ginv = np.empty((k + 1, k + 1))
        ginv[:k, :k] = job.ginv + np.outer(gb, gb) / schur
        ginv[:k, k] = ginv[k, :k] = -gb / schur
        ginv[k, k] = 1.0 / schur
        job.ginv = ginv
        job.signs = np.append(job.signs, sign)
    else:
        job.ginv = np.array([[1.0 / (x @ x)]])
        job.signs = np.array([sign])
    job.basis[:, k] = x
    job.order.append(j)
    job.valid[j] = False
    job.invalid.append(j)
    return True


def _lars_step(job, psi, corr):
    if not job.order:
        c = corr * job.inv_norms
        c[job.invalid] = 0.0
        j = int(np.argmax(np.abs(c)))
        job.c = c
        job.C = abs(c[j])
        job.C0 = job.C
        if job.C == 0 or not _lars_add(job, psi, j, np.sign(c[j])):
            job.done = True
            return
    else:
        a = corr * job.inv_norms
        C, A, c = job.C, job.A, job.c
        # in-place arithmetic: these are the longest vectors in the inner loop
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = np.subtract(C, c)
            den = np.subtract(A, a)
            g1 /= den
            g2 = np.add(C, c)
            np.add(A, a, out=den)
            g2 /= den
        tiny = 1e-12 * C
        np.copyto(g1, np.inf, where=g1 <= tiny)
        np.copyto(g2, np.inf, where=g2 <= tiny)
        gamma = np.fmin(g1, g2, out=g1)  # a 0/0 on one side leaves the other
        gamma[job.invalid] = np.inf
        j = int(np.argmin(gamma))
        step = gamma[j]
        if not np.isfinite(step) or step <= 0 or step > C / A * (1 + 1e-12):
            job.done = True
            return
        a *= step
        c -= a
        job.C = C - step * A
        job.resid = job.resid - step * job.u
        if job.C <= _ZERO_CORR * job.C0:
            job.done = True
            return
        if not _lars_add(job, psi, j, np.sign(job.c[j])):
            job.done = True
            return
    if len(job.order) >= job.j_max or not _lars_direction(job):
        job.done = True


def rank_batch(psi, y, masks, methods, j_max=None, normalize=True):
    """Rank dictionary columns for several row subsets at once.

    Parameters
    ----------
    psi : (N, P) array
        Dictionary evaluated on all N rows.
    y : (N,) array
    masks : (F, N) boolean array
        Rows used by each job.
    methods : sequence of str
        ``"omp"`` or ``"lars"`` per job.
    j_max : int, optional
        Cap on ranking length; each job also stops at ``min(n_rows - 1, P)``.
    normalize : bool
        Score OMP correlations on unit-norm columns (LARS always does).

    Returns
    -------
    list of int arrays, the column order for each job.
    """
    psi, y = _prepare(psi, y)
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    N, P = psi.shape
    if masks.shape[1] != N or len(methods) != len(masks):
        raise ValueError("masks must be (jobs, N) and match methods")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown ranking method {m!r}")
    sq_norms, sums = _masked_moments(psi, masks)
    jobs, lead = [], []
    for f, (rows, method) in enumerate(zip(masks, methods)):
        n_rows = int(rows.sum())
        jm = default_j_max(n_rows, P)
        if j_max is not None:
            jm = min(jm, int(j_max))
        if method == "lars":
            # centered columns; constant columns drop out and lead the ranking
            means = sums[:, f] / max(n_rows, 1)
            raw = np.sqrt(sq_norms[:, f])
            norms = np.sqrt(np.maximum(sq_norms[:, f] - n_rows * means**2, 0.0))
            flat = norms <= 1e-12 * raw
            norms[flat] = 0.0
            const = np.flatnonzero(flat & (raw > 0))[:1]
            lead.append([int(c) for c in const][:jm])
            job = _Job(method, rows, y, norms, jm - len(lead[-1]), means)
        else:
            lead.append([])
            job = _Job(method, rows, y, np.sqrt(sq_norms[:, f]), jm)
            if not normalize:
                job.score_inv = np.ones(P)
        jobs.append(job)
    while True:
        live = [job for job in jobs if not job.done]
        if not live:
            break
        V = np.column_stack([job.vector() for job in live])
        G = _correlate(psi, V)
        for i, job in enumerate(live):
            if job.method == "omp":
                _omp_step(job, psi, G[i])
            else:
                _lars_step(job, psi, G[i])
    return [np.asarray(first + job.order, dtype=np.intp) for first, job in zip(lead, jobs)]


def _masked_moments(psi, masks):
    """Per-job column sums of squares and column sums over the job rows."""
    N, P = psi.shape
    sq = np.empty((P, len(masks)))
    w = masks.T.astype(float)
    step = max(1, _BLOCK_BYTES // (8 * N))
    for s in range(0, P, step):
        blk = psi[:, s : s + step]
        sq[s : s + step] = (blk * blk).T @ w
    return sq, psi.T @ w


def _correlate(psi, V):
    """``(jobs, P)`` correlations, one contiguous row per job."""
    return V.T @ psi
