"""LARS, OMP and resampled PCE on the Ishigami function with 50 training points.

Run: python3 demos/ishigami_compare.py [seed]
"""

import sys

from rpcekit import analytic_ishigami, build_rankers, indices_from_pce, lhs_sample, r_squared
from rpcekit.bench import ishigami, ishigami_model
from rpcekit.rpce import RpceConfig


def main(seed=0):
    im = ishigami_model()
    train = lhs_sample(im, 50, seed=seed).evaluate(ishigami)
    test = lhs_sample(im, 10_000, seed=seed + 1).evaluate(ishigami)
    models = build_rankers(train, im, ["lars", "omp", "rpce"], rpce_config=RpceConfig(seed=seed))
    ref = analytic_ishigami()
    print(f"{'ranker':8s} {'terms':>5s} {'p':>3s} {'R2_test':>9s} {'S1':>7s} {'S2':>7s} {'S13':>7s}")
    for name, m in models.items():
        if isinstance(m, Exception):
            print(f"{name:8s} failed: {m}")
            continue
        s = indices_from_pce(m)
        r2 = r_squared(test.y, m.predict(test.X))
        print(f"{name:8s} {m.n_terms:5d} {m.p:3d} {r2:9.4f} {s.partial((0,)):7.4f} {s.partial((1,)):7.4f} "
              f"{s.partial((0, 2)):7.4f}")
    print(f"{'exact':8s} {'':5s} {'':3s} {'':9s} {ref.partial((0,)):7.4f} {ref.partial((1,)):7.4f} "
          f"{ref.partial((0, 2)):7.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
