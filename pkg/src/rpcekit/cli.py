"""Command-line entry point: ``rpcekit {fit,experiment,frequency,sobol,predict}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pce
from .experiment import (RANKERS, ConfigError, ExperimentConfig, _json, _Problem, fit_model,
                         run_experiment, run_frequency_study, run_sensitivity)
from .prob import ExperimentalDesign
from .rpce import DEFAULT_K_SET, MODES
from .sobol import UndefinedIndicesError, indices_from_pce


def _k_set(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok in ("N", "n"):
            out.append("N")
        else:
            try:
                out.append(int(tok))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad k value {tok!r}") from None
    return tuple(out)


def _rankers(text):
    out = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [r for r in out if r not in RANKERS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"rankers must come from {','.join(RANKERS)}")
    return out


def _common(p):
    p.add_argument("--benchmark", help="poly_sum, ishigami, varied_dim or truss")
    p.add_argument("--data", help="design CSV with columns x1..xM[,y]")
    p.add_argument("--input-model", help="input model JSON (needed with --data unless --benchmark is given)")
    p.add_argument("--dim", type=int, help="dimension of the varied_dim benchmark")
    p.add_argument("--geometry", help="truss geometry JSON")
    p.add_argument("--n-train", type=int, default=50)
    p.add_argument("--n-test", type=int, default=10_000)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--rankers", type=_rankers, default=RANKERS, help="comma list of lars,omp,rpce")
    p.add_argument("--k-set", type=_k_set, default=DEFAULT_K_SET, help="comma list, e.g. 3,5,10,20,N")
    p.add_argument("--score-mode", choices=MODES, default="corrected")
    p.add_argument("--p-max", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (default from RPCEKIT_WORKERS, else 1)")
    p.add_argument("--lhs-centered", action="store_true", help="stratum midpoints instead of jittered LHS")
    p.add_argument("--raw-correlation", action="store_true", help="score OMP candidates on raw columns")


def build_parser():
    parser = argparse.ArgumentParser(prog="rpcekit", description="Sparse and resampled PCE surrogates.")
    sub = parser.add_subparsers(dest="verb", required=True)
    helps = {
        "fit": "fit one surrogate and write model.json",
        "experiment": "replication study: report.csv, summary.json, quantiles.csv",
        "frequency": "selection frequencies across replications: frequency.csv",
        "sobol": "Sobol indices of fitted models: sobol.csv, sobol_summary.csv",
    }
    for verb, h in helps.items():
        _common(sub.add_parser(verb, help=h))
    p = sub.add_parser("predict", help="evaluate a saved model on a design CSV")
    p.add_argument("--model", required=True, help="model JSON written by fit")
    p.add_argument("--data", required=True, help="design CSV with columns x1..xM[,y]")
    p.add_argument("--out", default=".", help="output directory")
    return parser


def _config(args) -> ExperimentConfig:
    benchmark = args.benchmark
    if benchmark is None and args.data is None:
        benchmark = "ishigami"
    return ExperimentConfig(
        benchmark=benchmark, data=args.data, input_model=args.input_model, dim=args.dim,
        geometry=args.geometry, n_train=args.n_train, n_test=args.n_test, reps=args.reps,
        rankers=args.rankers, k_set=args.k_set, score_mode=args.score_mode, p_max=args.p_max,
        seed=args.seed, lhs_centered=args.lhs_centered, raw_correlation=args.raw_correlation,
        out=args.out, workers=args.workers,
    ).validate()


def _fit(cfg: ExperimentConfig):
    """Fit the first listed ranker on the whole data file, or on a seeded LHS design."""
    prob = _Problem(cfg)
    if cfg.data is not None:
        train = prob.pool
    else:
        train, _ = prob.designs(0)
    model = fit_model(cfg, cfg.rankers[0], train, prob.input_model)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_bytes(pce.save(model))
    (out / "train.csv").write_text(train.to_csv())
    lines = [f"ranker {cfg.rankers[0]}", f"terms {model.n_terms}", f"degree {model.p}",
             f"loo_error {model.eps_loo!r}"]
    try:
        s = indices_from_pce(model)
        (out / "sobol.csv").write_text(s.to_csv())
    except UndefinedIndicesError:
        pass
    return "\n".join(lines)


def _predict(args):
    model = pce.load(Path(args.model).read_bytes())
    ed = ExperimentalDesign.from_csv(Path(args.data).read_text())
    if ed.dim != model.input_model.dim:
        raise ValueError(f"data has {ed.dim} input columns, model expects {model.input_model.dim}")
    yhat = model.predict(ed.X)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["y_pred"] + [repr(float(v)) for v in yhat]
    (out / "predictions.csv").write_text("\n".join(rows) + "\n")
    return f"{len(yhat)} predictions"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "predict":
            msg = _predict(args)
        else:
            cfg = _config(args)
            if args.verb == "fit":
                msg = _fit(cfg)
            elif args.verb == "experiment":
                rep = run_experiment(cfg)
                msg = _json(rep.summary["r2_test"]).rstrip()
            elif args.verb == "frequency":
                table = run_frequency_study(cfg)
                msg = "\n".join(f"{r}: {len(c)} distinct multi-indices" for r, c in table.counts.items())
            else:
                rep = run_sensitivity(cfg)
                msg = "\n".join(f"{r}: mean total indices {np.round(rep.mean_totals[r], 4).tolist()}"
                                for r in rep.means)
    except (ConfigError, pce.PayloadError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"rpcekit: error: {exc}", file=sys.stderr)
        return 2
    print(msg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
