"""Total Sobol indices of the 23-bar truss deflection: sparse PCE against Monte Carlo.

Run: python3 demos/truss_sensitivity.py [n_train]
"""

import sys

import numpy as np

from rpcekit import build_sparse, indices_from_pce, lhs_sample, mc_sobol
from rpcekit.bench import truss_model
from rpcekit.truss import truss_deflection

NAMES = ["E_h", "E_o", "A_h", "A_o", "P1", "P2", "P3", "P4", "P5", "P6"]


def main(n_train=150):
    im = truss_model()
    ed = lhs_sample(im, n_train, seed=1).evaluate(truss_deflection)
    model = build_sparse(ed, im, "lars", p_max=4)
    pce_total = indices_from_pce(model).total
    mc = mc_sobol(truss_deflection, im, n=20_000, seed=2)
    print(f"PCE: {model.n_terms} terms, degree {model.p}, LOO error {model.eps_loo:.3e}")
    print(f"{'input':6s} {'S_T pce':>8s} {'S_T mc':>8s} {'+/-':>7s}")
    for i in np.argsort(-pce_total):
        print(f"{NAMES[i]:6s} {pce_total[i]:8.4f} {mc.total[i]:8.4f} {mc.total_se[i]:7.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 150)
