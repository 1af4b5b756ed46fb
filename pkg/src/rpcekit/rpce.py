"""Resampled PCE ranking.

Sparse builds on k-fold resamples (every fold left out once, for every k in
the k-set, with LARS and/or OMP) produce a multiset of selected
multi-indices. Each multi-index is scored by how often it was selected
(frequency score, weighted so that every k contributes the same maximum) and
by the mean normalized LOO-error increment it caused when it entered a path
(error score, in [-1, 1]). The held-out folds double as an outer validation
used to decide whether LARS, OMP or both feed the ranking.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .basis import design_matrix
from .pce import DEFAULT_P_MAX, build_batch
from .prob import ExperimentalDesign, InputModel, derive_seed

DEFAULT_K_SET = (3, 5, 10, 20, "N")
SOURCES = ("lars", "omp")
MODES = ("corrected", "literal")
MIN_FOLD_TRAIN = 3


@dataclass
class FoldPlan:
    k: int
    assignment: np.ndarray  # fold label 1..k per data point
    seed: int

    def train_mask(self, label):
        return self.assignment != label


def make_folds(n: int, k: int, seed: int = 0) -> FoldPlan:
    """Seeded random partition of ``n`` points into ``k`` near-equal folds."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= N, got k={k}, N={n}")
    rng = np.random.default_rng(derive_seed(seed, k))
    assignment = np.empty(n, dtype=int)
    assignment[rng.permutation(n)] = np.arange(n) % k + 1
    return FoldPlan(k, assignment, seed)


def adjust_k_set(k_set, n: int) -> tuple:
    """Resolve the ``"N"`` entry and drop fold counts the data cannot support."""
    out = set()
    for k in k_set:
        k = n if k in ("N", "n") else int(k)
        if 2 <= k <= n:
            out.add(k)
    if not out:
        raise ValueError(f"no admissible k in {tuple(k_set)} for N={n}")
    return tuple(sorted(out))


@dataclass(frozen=True)
class Candidate:
    alpha: tuple
    delta_eps: float
    k: int
    fold: int
    source: str


@dataclass
class CandidatePool:
    records: list = field(default_factory=list)
    r2: dict = field(default_factory=lambda: {s: [] for s in SOURCES})
    full: dict = field(default_factory=dict)  # companion builds on all rows, by method

    def restrict(self, sources) -> "CandidatePool":
        recs = [r for r in self.records if r.source in sources]
        return CandidatePool(recs, {s: list(v) for s, v in self.r2.items()}, dict(self.full))

    def counts(self):
        """``{alpha: {k: number of selections}}``."""
        out = defaultdict(lambda: defaultdict(int))
        for r in self.records:
            out[r.alpha][r.k] += 1
        return out


def collect_candidates(ed: ExperimentalDesign, input_model: InputModel, k_set=DEFAULT_K_SET,
                       sources=SOURCES, seed=0, p_max=DEFAULT_P_MAX, normalize=True, full_data=()):
    """Leave-one-fold-out sparse builds for every k and source.

    Returns a :class:`CandidatePool` whose ``r2`` attribute holds the
    held-out-fold R^2 values per source. Fold R^2 uses the variance of the
    full design response as reference, which keeps single-point folds (k = N)
    defined. Methods listed in ``full_data`` are also built on the whole
    design inside the same batch and returned in ``pool.full``.
    """
    n = ed.n
    ks = adjust_k_set(k_set, n)
    xi = input_model.to_standard(ed.X)
    y = ed.y
    var_ref = float(np.var(y, ddof=1)) if n > 1 else 0.0
    jobs = []
    for k in ks:
        plan = make_folds(n, k, seed)
        for label in range(1, k + 1):
            train = plan.train_mask(label)
            if train.sum() < MIN_FOLD_TRAIN:
                warnings.warn(f"fold {label} of k={k} has fewer than {MIN_FOLD_TRAIN} training points; skipped")
                continue
            for src in sources:
                jobs.append((k, label, src, train))
    pool = CandidatePool(r2={s: [] for s in sources})
    n_folds = len(jobs)
    jobs += [(0, 0, m, np.ones(n, bool)) for m in full_data]
    if not jobs:
        return pool
    masks = np.array([j[3] for j in jobs])
    builds = build_batch(xi, y, input_model.families, masks, [j[2] for j in jobs], p_max, normalize)
    for (_, _, m, _), res in zip(jobs[n_folds:], builds[n_folds:]):
        pool.full[m] = res
    for (k, label, src, train), res in zip(jobs[:n_folds], builds[:n_folds]):
        if not res.ok:
            continue
        for alpha, d in zip(res.alphas, res.delta_eps):
            pool.records.append(Candidate(tuple(int(a) for a in alpha), float(d), k, label, src))
        hold = ~train
        pred = design_matrix(input_model.families, res.alphas, xi[hold]) @ res.beta
        mse = float(np.mean((y[hold] - pred) ** 2))
        pool.r2[src].append(1.0 - mse / var_ref if var_ref > 0 else np.nan)
    return pool


def _k_values(pool, k_set):
    if k_set is None:
        return tuple(sorted({r.k for r in pool.records}))
    return tuple(int(k) for k in k_set)


def frequency_score(pool: CandidatePool, k_set=None) -> dict:
    """Weighted selection counts ``s_f = sum_k count_k * lcm(k_set) / k``.

    ``k_set`` must already be resolved against N (see :func:`adjust_k_set`);
    by default the fold counts present in the pool are used.
    """
    ks = _k_values(pool, k_set)
    lcm = math.lcm(*ks)
    out = {}
    for alpha, per_k in pool.counts().items():
        out[alpha] = sum(c * (lcm // k) for k, c in per_k.items())
    return out


def error_score(pool: CandidatePool, k_set=None) -> dict:
    """Mean normalized LOO-error increments, averaged over k.

    Per k, increments are divided by the largest ``|delta eps|`` of their
    (k, source) group and averaged over the selections of the multi-index;
    the per-k scores are summed and divided by the total (unweighted)
    selection count.
    """
    ks = set(_k_values(pool, k_set))
    dmax = defaultdict(float)
    for r in pool.records:
        dmax[(r.k, r.source)] = max(dmax[(r.k, r.source)], abs(r.delta_eps))
    sums = defaultdict(lambda: defaultdict(float))
    for r in pool.records:
        if r.k not in ks:
            continue
        m = dmax[(r.k, r.source)]
        sums[r.alpha][r.k] += r.delta_eps / m if m > 0 else 0.0
    counts = pool.counts()
    out = {}
    for alpha, per_k in counts.items():
        f = sum(c for k, c in per_k.items() if k in ks)
        s = sum(sums[alpha][k] / c for k, c in per_k.items() if k in ks)
        out[alpha] = s / f if f else 0.0
    return out


def per_k_error_scores(pool: CandidatePool) -> dict:
    """``{(alpha, k): s_ek}`` before averaging over k."""
    dmax = defaultdict(float)
    for r in pool.records:
        dmax[(r.k, r.source)] = max(dmax[(r.k, r.source)], abs(r.delta_eps))
    sums = defaultdict(float)
    for r in pool.records:
        m = dmax[(r.k, r.source)]
        sums[(r.alpha, r.k)] += r.delta_eps / m if m > 0 else 0.0
    counts = pool.counts()
    return {key: v / counts[key[0]][key[1]] for key, v in sums.items()}


@dataclass
class ScoreTable:
    alphas: np.ndarray
    s_f: np.ndarray
    s_e: np.ndarray
    s_total: np.ndarray
    rank: np.ndarray  # 1 = best, aligned with the rows

    def ranked_alphas(self):
        return self.alphas[np.argsort(self.rank, kind="stable")]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "s_f", "s_e", "s_total", "rank"])
        for i in np.argsort(self.rank, kind="stable"):
            w.writerow([" ".join(str(int(a)) for a in self.alphas[i]), repr(float(self.s_f[i])),
                        repr(float(self.s_e[i])), repr(float(self.s_total[i])), int(self.rank[i])])
        return buf.getvalue()


def total_rank(s_f: dict, s_e: dict, mode: str = "corrected") -> ScoreTable:
    """Order multi-indices by total score.

    ``literal``: descending ``s_f + s_e``. ``corrected``: descending
    ``s_f - s_e``, which (with ``|s_e| <= 1`` and integer gaps in ``s_f``)
    ranks by ``s_f`` and prefers error-reducing terms within ties. Remaining
    ties follow graded-lex order.
    """
    if mode not in MODES:
        raise ValueError(f"unknown score mode {mode!r}")
    keys = sorted(s_f, key=lambda a: (sum(a),) + tuple(a))
    if not keys:
        return ScoreTable(np.zeros((0, 0), np.int32), *(np.zeros(0) for _ in range(3)), np.zeros(0, int))
    sf = np.array([float(s_f[a]) for a in keys])
    se = np.array([float(s_e.get(a, 0.0)) for a in keys])
    total = sf + se if mode == "literal" else sf - se
    if mode == "corrected":
        order = np.lexsort((np.arange(len(keys)), se, -sf))
    else:
        order = np.lexsort((np.arange(len(keys)), -total))
    rank = np.empty(len(keys), dtype=int)
    rank[order] = np.arange(1, len(keys) + 1)
    return ScoreTable(np.array(keys, dtype=np.int32), sf, se, total, rank)


def choose_source(r2_lars, r2_omp) -> str:
    """``"lars"`` if Q1(LARS) > Q3(OMP), ``"omp"`` if the reverse, else ``"both"``."""
    a = np.asarray([v for v in r2_lars if np.isfinite(v)], dtype=float)
    b = np.asarray([v for v in r2_omp if np.isfinite(v)], dtype=float)
    if a.size == 0 and b.size == 0:
        return "both"
    if b.size == 0:
        return "lars"
    if a.size == 0:
        return "omp"
    q1a, q3a = np.percentile(a, [25, 75], method="linear")
    q1b, q3b = np.percentile(b, [25, 75], method="linear")
    if q1a > q3b:
        return "lars"
    if q1b > q3a:
        return "omp"
    return "both"


@dataclass
class RpceConfig:
    k_set: tuple = DEFAULT_K_SET
    mode: str = "corrected"
    seed: int = 0
    source: str = "auto"  # auto | lars | omp | both
    p_max: int = DEFAULT_P_MAX
    normalize: bool = True
    full_data: tuple = ()  # plain builds on all rows to batch with the folds


@dataclass
class RpceRanking:
    alphas: np.ndarray
    table: ScoreTable
    source: str
    pool: CandidatePool
    k_set: tuple
    meta: dict


def rpce_rank(ed: ExperimentalDesign, input_model: InputModel, config: RpceConfig | None = None) -> RpceRanking:
    """Candidate collection, source choice and scoring; returns ranked multi-indices."""
    cfg = config or RpceConfig()
    ks = adjust_k_set(cfg.k_set, ed.n)
    wanted = SOURCES if cfg.source in ("auto", "both") else (cfg.source,)
    pool = collect_candidates(ed, input_model, ks, wanted, cfg.seed, cfg.p_max, cfg.normalize, cfg.full_data)
    return rank_pool(pool, cfg, ks)


def rank_pool(pool: CandidatePool, cfg: RpceConfig, ks: tuple) -> RpceRanking:
    """Source choice and scoring on a collected pool (``ks`` as resolved by :func:`adjust_k_set`)."""
    if cfg.source == "auto":
        source = choose_source(pool.r2["lars"], pool.r2["omp"])
    else:
        source = cfg.source
    used = pool.restrict(SOURCES if source == "both" else (source,))
    if not used.records:
        raise RuntimeError("resampled builds produced no candidates")
    table = total_rank(frequency_score(used, ks), error_score(used, ks), cfg.mode)
    meta = {"source": source, "k_set": list(ks), "mode": cfg.mode, "seed": cfg.seed,
            "n_candidates": int(len(table.alphas))}
    return RpceRanking(table.ranked_alphas(), table, source, pool, ks, meta)
