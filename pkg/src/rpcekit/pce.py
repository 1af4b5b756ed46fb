"""Degree-adaptive sparse PCE construction, prediction and serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import basis
from .prob import ExperimentalDesign, InputModel
from .regress import loo_path, prefix_coefficients
from .select import default_j_max, rank_batch

SCHEMA_VERSION = 1
DEFAULT_P_MAX = 20
# LOO errors closer than this (relative to mean(y^2)) are treated as ties,
# resolved toward the smaller model
LOO_TIE = 1e-20


class BuildError(RuntimeError):
    pass


class PayloadError(ValueError):
    pass


class VersionError(PayloadError):
    pass


@dataclass
class PceModel:
    """A truncated PCE: multi-indices, coefficients and the input model."""

    input_model: InputModel
    alphas: np.ndarray
    beta: np.ndarray
    p: int
    eps_loo: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.int32).reshape(-1, self.input_model.dim)
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        if len(self.beta) != len(self.alphas):
            raise ValueError("one coefficient per multi-index required")

    @property
    def n_terms(self) -> int:
        return len(self.beta)

    def predict_standard(self, xi):
        psi = basis.design_matrix(self.input_model.families, self.alphas, xi)
        return psi @ self.beta

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.size == 0:
            return np.zeros(0)
        return self.predict_standard(self.input_model.to_standard(X))

    # -- serialization ------------------------------------------------------
    def to_dict(self):
        return {
            "version": SCHEMA_VERSION,
            "marginals": [m.to_dict() for m in self.input_model.marginals],
            "alphas": self.alphas.astype(int).tolist(),
            "betas": [float(b) for b in self.beta],
            "p": int(self.p),
            "eps_loo": float(self.eps_loo),
            "meta": self.meta,
        }


def save(model: PceModel) -> bytes:
    """Serialize to JSON; floats are written with round-trip precision."""
    return json.dumps(model.to_dict(), sort_keys=True, allow_nan=True).encode()


def load(payload) -> PceModel:
    if isinstance(payload, bytes):
        payload = payload.decode()
    try:
        d = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise PayloadError(f"malformed model payload: {exc}") from None
    if not isinstance(d, dict) or "version" not in d:
        raise PayloadError("model payload lacks a version field")
    if d["version"] != SCHEMA_VERSION:
        raise VersionError(f"model schema version {d['version']} unsupported (expected {SCHEMA_VERSION})")
    try:
        im = InputModel.from_list(d["marginals"])
        alphas = np.asarray(d["alphas"], dtype=np.int32).reshape(-1, im.dim)
        return PceModel(im, alphas, d["betas"], d["p"], d["eps_loo"], d.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise PayloadError(f"malformed model payload: {exc}") from None


@dataclass
class PathChoice:
    """Best prefix of one ranked path."""

    j: int
    eps: float
    beta: np.ndarray
    eps_path: np.ndarray


def best_prefix(psi_ordered, y) -> PathChoice | None:
    """OLS-refit every prefix and keep the one with the smallest LOO error."""
    eps, r, qty = loo_path(psi_ordered, y)
    finite = np.isfinite(eps)
    if not finite.any():
        return None
    tol = LOO_TIE * float(np.mean(y**2))
    e_min = eps[finite].min()
    j = int(np.flatnonzero(finite & (eps <= e_min + tol))[0]) + 1
    return PathChoice(j, float(eps[j - 1]), prefix_coefficients(r, qty, j), eps)


@dataclass
class FoldBuild:
    """Outcome of one degree-adaptive build (possibly on a row subset)."""

    alphas: np.ndarray
    beta: np.ndarray
    p: int
    eps_loo: float
    delta_eps: np.ndarray
    eps_by_degree: dict

    @property
    def ok(self):
        return np.isfinite(self.eps_loo)


def _stop_early(history, p):
    if p < 3:
        return False
    return history[p] > history[p - 1] > history[p - 2]


def build_batch(xi, y, families, masks, methods, p_max=DEFAULT_P_MAX, normalize=True):
    """Degree-adaptive sparse builds for several (row subset, ranker) jobs.

    For each degree ``p`` the total-degree dictionary is evaluated once on
    all rows and ranked for every unfinished job in lockstep. Each job keeps
    its own best ``(p, J)`` and its own early-stopping state.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    M = xi.shape[1]
    F = len(masks)
    histories = [dict() for _ in range(F)]
    best = [None] * F
    running = list(range(F))
    for p in range(1, p_max + 1):
        if not running:
            break
        alphas = basis.enumerate_total_degree(M, p)
        psi = basis.design_matrix(families, alphas, xi)
        orders = rank_batch(psi, y, masks[running], [methods[f] for f in running], normalize=normalize)
        still = []
        for f, order in zip(running, orders):
            rows = masks[f]
            yf = y[rows]
            choice = best_prefix(psi[np.ix_(rows, order)], yf) if len(order) else None
            eps_p = choice.eps if choice is not None else np.inf
            histories[f][p] = eps_p
            if choice is not None:
                tol = LOO_TIE * float(np.mean(yf**2))
                if best[f] is None or eps_p < best[f].eps_loo - tol:
                    sel = order[: choice.j]
                    delta = np.diff(np.concatenate([[0.0], choice.eps_path[: choice.j]]))
                    best[f] = FoldBuild(alphas[sel].copy(), choice.beta, p, eps_p, delta, histories[f])
            if not _stop_early(histories[f], p):
                still.append(f)
        running = still
    out = []
    for f in range(F):
        if best[f] is None:
            out.append(FoldBuild(np.zeros((0, M), np.int32), np.zeros(0), 0, np.inf, np.zeros(0), histories[f]))
        else:
            out.append(best[f])
    return out


def build_from_ranking(xi, y, families, ranked_alphas, p_max=DEFAULT_P_MAX):
    """Degree-adaptive build on a fixed ranked candidate list.

    At degree ``p`` the candidates are the ranked multi-indices of total
    degree ``<= p`` in their ranked order; everything else follows the
    LARS/OMP builder.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    ranked = np.asarray(ranked_alphas, dtype=np.int32).reshape(-1, xi.shape[1])
    degrees = ranked.sum(axis=1)
    psi_all = basis.design_matrix(families, ranked, xi)
    history, best = {}, None
    tol = LOO_TIE * float(np.mean(y**2))
    for p in range(1, p_max + 1):
        cand = np.flatnonzero(degrees <= p)
        cand = cand[: default_j_max(len(y), len(cand))]
        choice = best_prefix(psi_all[:, cand], y) if len(cand) else None
        eps_p = choice.eps if choice is not None else np.inf
        history[p] = eps_p
        if choice is not None and (best is None or eps_p < best.eps_loo - tol):
            sel = cand[: choice.j]
            delta = np.diff(np.concatenate([[0.0], choice.eps_path[: choice.j]]))
            best = FoldBuild(ranked[sel].copy(), choice.beta, p, eps_p, delta, history)
        if _stop_early(history, p):
            break
    return best


def _check_design(ed, p_max):
    if ed.y is None:
        raise ValueError("experimental design has no responses")
    if ed.n < 3:
        raise ValueError("need at least 3 training points")
    if p_max < 1:
        raise ValueError("p_max must be >= 1")


def _finish(res, input_model, meta) -> PceModel:
    if res is None or not res.ok:
        raise BuildError("no well-conditioned sparse model found for any degree")
    meta["eps_by_degree"] = {str(k): float(v) for k, v in res.eps_by_degree.items()}
    return PceModel(input_model, res.alphas, res.beta, res.p, res.eps_loo, meta)


def build_sparse(ed: ExperimentalDesign, input_model: InputModel, ranker="lars", p_max=DEFAULT_P_MAX,
                 normalize=True, rpce_config=None) -> PceModel:
    """Sparse PCE of ``ed`` with a LARS, OMP or rPCE ranking.

    ``ranker`` is ``"lars"``, ``"omp"``, ``"rpce"`` or an explicit ranked
    list of multi-indices.
    """
    _check_design(ed, p_max)
    xi = input_model.to_standard(ed.X)
    fams = input_model.families
    meta = {"ranker": ranker if isinstance(ranker, str) else "explicit", "n_train": ed.n}
    if isinstance(ranker, str) and ranker in ("lars", "omp"):
        res = build_batch(xi, ed.y, fams, np.ones((1, ed.n), bool), [ranker], p_max, normalize)[0]
    else:
        if isinstance(ranker, str) and ranker == "rpce":
            from .rpce import RpceConfig, rpce_rank

            cfg = rpce_config or RpceConfig(p_max=p_max, normalize=normalize)
            ranking = rpce_rank(ed, input_model, cfg)
            ranked = ranking.alphas
            meta.update(ranking.meta)
        elif isinstance(ranker, str):
            raise ValueError(f"unknown ranker {ranker!r}")
        else:
            ranked = ranker
        res = build_from_ranking(xi, ed.y, fams, ranked, p_max)
    return _finish(res, input_model, meta)


FIT_ERRORS = (BuildError, RuntimeError, ValueError, np.linalg.LinAlgError)


def build_rankers(ed: ExperimentalDesign, input_model: InputModel, rankers, p_max=DEFAULT_P_MAX,
                  normalize=True, rpce_config=None) -> dict:
    """Fit several rankers on one design.

    Returns ``{ranker: PceModel}``, with the raised exception in place of
    the model when a ranker fails (see ``FIT_ERRORS``). With ``"rpce"`` in
    the list, the plain LARS/OMP builds on the full design join the batched
    fold builds of the resampling, so they add little to its cost. Models
    agree with separate :func:`build_sparse` calls up to rounding.
    """
    rankers = list(rankers)
    plain = [r for r in rankers if r in ("lars", "omp")]
    out = {}
    from .rpce import SOURCES, RpceConfig, adjust_k_set, collect_candidates, rank_pool

    cfg = rpce_config or RpceConfig(p_max=p_max, normalize=normalize)
    if "rpce" not in rankers or not plain or (cfg.p_max, cfg.normalize) != (p_max, normalize):
        for r in rankers:
            try:
                out[r] = build_sparse(ed, input_model, r, p_max, normalize, rpce_config)
            except FIT_ERRORS as exc:
                out[r] = exc
        return out
    try:
        _check_design(ed, p_max)
        ks = adjust_k_set(cfg.k_set, ed.n)
        xi = input_model.to_standard(ed.X)
    except FIT_ERRORS as exc:
        return {r: exc for r in rankers}
    wanted = SOURCES if cfg.source in ("auto", "both") else (cfg.source,)
    pool = collect_candidates(ed, input_model, ks, wanted, cfg.seed, cfg.p_max, cfg.normalize, tuple(plain))
    for r in plain:
        try:
            out[r] = _finish(pool.full[r], input_model, {"ranker": r, "n_train": ed.n})
        except FIT_ERRORS as exc:
            out[r] = exc
    try:
        ranking = rank_pool(pool, cfg, ks)
        meta = {"ranker": "rpce", "n_train": ed.n, **ranking.meta}
        res = build_from_ranking(xi, ed.y, input_model.families, ranking.alphas, p_max)
        out["rpce"] = _finish(res, input_model, meta)
    except FIT_ERRORS as exc:
        out["rpce"] = exc
    return {r: out[r] for r in rankers}
