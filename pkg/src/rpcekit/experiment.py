"""Seeded replication studies comparing LARS, OMP and rPCE surrogates.

Every replication draws its own training and test designs from substreams
of the master seed, so results do not depend on execution order or on the
number of worker processes. Reports are sorted before they are written.
Wall-clock times go to a separate file because they are never reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .basis import graded_lex_id
from .bench import get_benchmark
from .pce import FIT_ERRORS, build_rankers, build_sparse
from .prob import ExperimentalDesign, InputModel, derive_seed, lhs_sample
from .regress import UndefinedMetricError, r_squared
from .rpce import DEFAULT_K_SET, MODES, RpceConfig
from .sobol import UndefinedIndicesError, indices_from_pce
from .truss import TrussGeometry

WORKERS_ENV = "RPCEKIT_WORKERS"
RANKERS = ("lars", "omp", "rpce")
ROW_FIELDS = ("rep", "ranker", "status", "r2_test", "eps_loo", "n_terms", "p", "source")


class ConfigError(ValueError):
    pass


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from None


@dataclass
class ExperimentConfig:
    benchmark: str | None = "ishigami"
    data: str | None = None  # design CSV (x1..xM, y) used instead of a benchmark
    input_model: str | None = None  # InputModel JSON file for external data
    dim: int | None = None
    geometry: str | None = None  # truss geometry JSON file
    n_train: int = 50
    n_test: int = 10_000
    reps: int = 1
    rankers: tuple = RANKERS
    k_set: tuple = DEFAULT_K_SET
    score_mode: str = "corrected"
    source: str = "auto"
    p_max: int = 20
    seed: int = 0
    lhs_centered: bool = False
    raw_correlation: bool = False
    out: str | None = None
    workers: int | None = None

    def validate(self):
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.data is None and self.benchmark is None:
            raise ConfigError("need a benchmark or a data file")
        if self.n_train < 3:
            raise ConfigError("n_train must be >= 3")
        if self.n_test < 1:
            raise ConfigError("n_test must be >= 1")
        if self.p_max < 1:
            raise ConfigError("p_max must be >= 1")
        bad = [r for r in self.rankers if r not in RANKERS]
        if bad or not self.rankers:
            raise ConfigError(f"rankers must be a non-empty subset of {RANKERS}")
        if self.score_mode not in MODES:
            raise ConfigError(f"score_mode must be one of {MODES}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self


# -- problem setup ----------------------------------------------------------

class _Problem:
    """Input model plus a way to draw seeded train/test designs."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.reference = None
        if cfg.data is not None:
            self.pool = ExperimentalDesign.from_csv(Path(cfg.data).read_text())
            if self.pool.y is None:
                raise ConfigError("data file needs a y column")
            if cfg.input_model is not None:
                self.input_model = InputModel.from_json(Path(cfg.input_model).read_text())
            elif cfg.benchmark is not None:
                self.input_model = self._bench().input_model
            else:
                raise ConfigError("external data needs an input model (or a benchmark to borrow it from)")
            if self.input_model.dim != self.pool.dim:
                raise ConfigError("input model dimension does not match the data file")
            if cfg.n_train >= self.pool.n:
                raise ConfigError("n_train must be smaller than the number of data rows")
            self.func = None
        else:
            bm = self._bench()
            self.input_model, self.func = bm.input_model, bm.evaluate
            self.reference = bm.reference.get("sobol")

    def _bench(self):
        geo = None
        if self.cfg.geometry is not None:
            geo = TrussGeometry.from_json(Path(self.cfg.geometry).read_text())
        return get_benchmark(self.cfg.benchmark, dim=self.cfg.dim, geometry=geo)

    def designs(self, rep):
        s = self.cfg.seed
        if self.func is None:
            # random split of the external data; the rest is the test set
            perm = np.random.default_rng(derive_seed(s, rep, 0)).permutation(self.pool.n)
            tr, te = perm[: self.cfg.n_train], perm[self.cfg.n_train :]
            return (ExperimentalDesign(self.pool.X[tr], self.pool.y[tr]),
                    ExperimentalDesign(self.pool.X[te], self.pool.y[te]))
        train = lhs_sample(self.input_model, self.cfg.n_train, derive_seed(s, rep, 0), self.cfg.lhs_centered)
        test = lhs_sample(self.input_model, self.cfg.n_test, derive_seed(s, rep, 1))
        return train.evaluate(self.func), test.evaluate(self.func)


def _rpce_config(cfg: ExperimentConfig, rep: int) -> RpceConfig:
    return RpceConfig(k_set=tuple(cfg.k_set), mode=cfg.score_mode, seed=derive_seed(cfg.seed, rep, 2),
                      source=cfg.source, p_max=cfg.p_max, normalize=not cfg.raw_correlation)


def fit_model(cfg: ExperimentConfig, ranker: str, train: ExperimentalDesign, input_model, rep=0):
    return build_sparse(train, input_model, ranker, p_max=cfg.p_max, normalize=not cfg.raw_correlation,
                        rpce_config=_rpce_config(cfg, rep))


def _run_rep(cfg: ExperimentConfig, rep: int):
    """All rankers on one replication: report rows, selected sets, Sobol indices, timings.

    The rankers are fitted together (see :func:`build_rankers`); the recorded
    time of each row is then the shared fitting time plus its own evaluation.
    """
    prob = _Problem(cfg)
    train, test = prob.designs(rep)
    t0 = time.perf_counter()
    models = build_rankers(train, prob.input_model, cfg.rankers, cfg.p_max, not cfg.raw_correlation,
                           _rpce_config(cfg, rep))
    fit_time = time.perf_counter() - t0
    out = []
    for ranker in cfg.rankers:
        t0 = time.perf_counter()
        row = {"rep": rep, "ranker": ranker, "status": "ok", "r2_test": "", "eps_loo": "",
               "n_terms": "", "p": "", "source": ""}
        alphas, sobol = [], None
        model = models[ranker]
        try:
            if isinstance(model, Exception):
                raise model
            pred = model.predict(test.X)
            row.update(eps_loo=model.eps_loo, n_terms=model.n_terms, p=model.p,
                       source=model.meta.get("source", ""))
            try:
                row["r2_test"] = r_squared(test.y, pred)
            except UndefinedMetricError:
                pass
            alphas = [tuple(int(v) for v in a) for a in model.alphas]
            try:
                sobol = indices_from_pce(model)
            except UndefinedIndicesError:
                pass
        except FIT_ERRORS as exc:
            row["status"] = f"failed: {type(exc).__name__}"
        out.append((row, alphas, sobol, fit_time + time.perf_counter() - t0))
    return out


def _map_reps(cfg: ExperimentConfig):
    workers = cfg.workers or default_workers()
    reps = range(cfg.reps)
    if workers == 1 or cfg.reps == 1:
        results = [_run_rep(cfg, r) for r in reps]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.reps)) as ex:
            results = list(ex.map(_run_rep, [cfg] * cfg.reps, reps))
    flat = [item for rep_items in results for item in rep_items]
    order = {r: i for i, r in enumerate(cfg.rankers)}
    flat.sort(key=lambda it: (it[0]["rep"], order[it[0]["ranker"]]))
    return flat


# -- reports ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def aggregate(values) -> dict:
    """Mean and quartiles (linear-interpolation percentiles) of finite values."""
    v = np.asarray([x for x in values if x != "" and np.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"n": 0}
    q = np.percentile(v, [0, 25, 50, 75, 100], method="linear")
    return {"n": int(v.size), "mean": float(v.mean()), "min": float(q[0]), "q1": float(q[1]),
            "median": float(q[2]), "q3": float(q[3]), "max": float(q[4])}


@dataclass
class ReplicationReport:
    rows: list
    summary: dict
    selections: list = field(default_factory=list)  # per row: selected multi-indices
    sobol: list = field(default_factory=list)  # per row: SobolIndices or None
    timings: list = field(default_factory=list)  # per row: seconds

    def rows_csv(self) -> str:
        return _csv(ROW_FIELDS, [[r[k] for k in ROW_FIELDS] for r in self.rows])

    def quantiles_csv(self) -> str:
        rows = []
        for ranker, agg in self.summary["r2_test"].items():
            rows.append([ranker] + [agg.get(k, "") for k in ("n", "mean", "min", "q1", "median", "q3", "max")])
        return _csv(["ranker", "n", "mean", "min", "q1", "median", "q3", "max"], rows)

    def timings_csv(self) -> str:
        return _csv(["rep", "ranker", "seconds"],
                    [[r["rep"], r["ranker"], t] for r, t in zip(self.rows, self.timings)])


def _summarize(cfg, rows):
    by = {r: [x for x in rows if x["ranker"] == r] for r in cfg.rankers}
    return {
        "config": _config_dict(cfg),
        "r2_test": {r: aggregate([x["r2_test"] for x in v]) for r, v in by.items()},
        "n_terms": {r: aggregate([x["n_terms"] for x in v]) for r, v in by.items()},
        "failed": {r: sum(x["status"] != "ok" for x in v) for r, v in by.items()},
    }


def _config_dict(cfg):
    d = asdict(cfg)
    for k in ("out", "workers"):
        d.pop(k)
    d["rankers"] = list(cfg.rankers)
    d["k_set"] = [k if isinstance(k, str) else int(k) for k in cfg.k_set]
    return d


def _write(out, files: dict):
    if out is None:
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (path / name).write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run_experiment(cfg: ExperimentConfig) -> ReplicationReport:
    """Fit every ranker on every replication and score it on the test design.

    Writes ``report.csv``, ``summary.json``, ``quantiles.csv`` and
    ``timings.csv`` into ``cfg.out`` when it is set.
    """
    cfg.validate()
    flat = _map_reps(cfg)
    rows = [it[0] for it in flat]
    rep = ReplicationReport(rows, _summarize(cfg, rows), [it[1] for it in flat], [it[2] for it in flat],
                            [it[3] for it in flat])
    _write(cfg.out, {"report.csv": rep.rows_csv(), "summary.json": _json(rep.summary),
                     "quantiles.csv": rep.quantiles_csv(), "timings.csv": rep.timings_csv()})
    return rep


@dataclass
class FrequencyTable:
    """Selection counts per (ranker, multi-index) across replications."""

    counts: dict  # ranker -> Counter of alpha tuples
    reps: int

    @classmethod
    def from_report(cls, rep: ReplicationReport, rankers) -> "FrequencyTable":
        counts = {r: Counter() for r in rankers}
        for row, sel in zip(rep.rows, rep.selections):
            counts[row["ranker"]].update(sel)
        return cls(counts, len({row["rep"] for row in rep.rows}))

    def top(self, ranker, n):
        """``n`` most frequent multi-indices (ties broken by graded-lex id)."""
        c = self.counts[ranker]
        return sorted(c, key=lambda a: (-c[a], graded_lex_id(a)))[:n]

    def to_csv(self) -> str:
        rows = []
        for ranker, c in self.counts.items():
            for a in sorted(c, key=graded_lex_id):
                rows.append([ranker, graded_lex_id(a), " ".join(map(str, a)), c[a]])
        return _csv(["ranker", "id", "alpha", "count"], rows)


def run_frequency_study(cfg: ExperimentConfig) -> FrequencyTable:
    """How often each multi-index ends up in the final model, per ranker.

    Writes ``frequency.csv`` (plus the replication report files).
    """
    table = FrequencyTable.from_report(run_experiment(cfg), cfg.rankers)
    _write(cfg.out, {"frequency.csv": table.to_csv()})
    return table


@dataclass
class SensitivityReport:
    rows: list  # (rep, ranker, subset, S, S_total)
    means: dict  # ranker -> {subset: mean S}
    mean_totals: dict  # ranker -> per-variable mean total index
    errors: dict | None  # ranker -> {subset: mean S - reference}

    def rows_csv(self) -> str:
        return _csv(["rep", "ranker", "subset", "S", "S_total"], self.rows)

    def summary_csv(self) -> str:
        out = []
        for ranker, m in self.means.items():
            for u in sorted(m, key=lambda u: (len(u), u)):
                label = " ".join(str(i + 1) for i in u)
                st = self.mean_totals[ranker][u[0]] if len(u) == 1 else ""
                err = self.errors[ranker].get(u, "") if self.errors else ""
                out.append([ranker, label, m[u], st, err])
        return _csv(["ranker", "subset", "mean_S", "mean_S_total", "delta_S"], out)


def run_sensitivity(cfg: ExperimentConfig, reference=None, report=None) -> SensitivityReport:
    """Sobol indices of every fitted model, their means and errors.

    ``reference`` (a :class:`SobolIndices`) defaults to the benchmark's
    analytic indices when it has them; without one the errors are omitted.
    Subsets are those realized in some model or in the reference; a subset
    missing from a model counts as zero for that model. Pass the
    :class:`ReplicationReport` of ``cfg`` as ``report`` to skip refitting.
    """
    rep = report if report is not None else run_experiment(cfg)
    if reference is None and cfg.data is None:
        reference = _Problem(cfg).reference
    subsets = set(reference.interactions) if reference is not None else set()
    for s in rep.sobol:
        if s is not None:
            subsets |= set(s.interactions)
    subsets = sorted(subsets, key=lambda u: (len(u), u))
    rows, acc, tot = [], {r: [] for r in cfg.rankers}, {r: [] for r in cfg.rankers}
    for row, s in zip(rep.rows, rep.sobol):
        if s is None:
            continue
        acc[row["ranker"]].append([s.partial(u) for u in subsets])
        tot[row["ranker"]].append(s.total)
        for u in subsets:
            st = float(s.total[u[0]]) if len(u) == 1 else ""
            rows.append([row["rep"], row["ranker"], " ".join(str(i + 1) for i in u), s.partial(u), st])
    means, mean_totals = {}, {}
    for r in cfg.rankers:
        if acc[r]:
            mu = np.mean(acc[r], axis=0)
            means[r] = {u: float(v) for u, v in zip(subsets, mu)}
            mean_totals[r] = [float(v) for v in np.mean(tot[r], axis=0)]
    errors = None
    if reference is not None:
        errors = {r: {u: m[u] - reference.partial(u) for u in subsets} for r, m in means.items()}
    report = SensitivityReport(rows, means, mean_totals, errors)
    _write(cfg.out, {"sobol.csv": report.rows_csv(), "sobol_summary.csv": report.summary_csv()})
    return report
