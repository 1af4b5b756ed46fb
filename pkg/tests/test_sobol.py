import math

import numpy as np
import pytest

from rpcekit import prob
from rpcekit.bench import ishigami, ishigami_model
from rpcekit.pce import PceModel, build_sparse
from rpcekit.prob import InputModel, lhs_sample
from rpcekit.sobol import UndefinedIndicesError, analytic_ishigami, indices_from_pce, mc_sobol


def gaussian_model(M):
    return InputModel([prob.gaussian(0.0, 1.0)] * M)


def test_single_term_model():
    s = indices_from_pce(PceModel(gaussian_model(2), [[0, 0], [1, 0]], [4.0, 2.5], 1, 0.0))
    np.testing.assert_allclose(s.first_order, [1.0, 0.0])
    np.testing.assert_allclose(s.total, [1.0, 0.0])
    assert s.variance == pytest.approx(6.25)


def test_constant_model_is_undefined():
    with pytest.raises(UndefinedIndicesError):
        indices_from_pce(PceModel(gaussian_model(2), [[0, 0]], [4.0], 0, 0.0))


def test_partition_and_dominance_on_random_models():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = np.unique(rng.integers(0, 4, size=(15, 4)), axis=0)
        m = PceModel(gaussian_model(4), A, rng.normal(size=len(A)), 3, 0.0)
        s = indices_from_pce(m)
        assert sum(s.interactions.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(v >= 0 for v in s.interactions.values())
        assert np.all(s.first_order <= s.total + 1e-15)
        # total index: sum of partials over subsets containing i
        for i in range(4):
            tot = sum(v for u, v in s.interactions.items() if i in u)
            assert s.total[i] == pytest.approx(tot, abs=1e-12)


def test_analytic_ishigami_reference():
    s = analytic_ishigami()
    assert s.first_order[0] == pytest.approx(0.3139, abs=5e-5)
    assert s.first_order[1] == pytest.approx(0.4424, abs=5e-5)
    assert s.partial((0, 2)) == pytest.approx(0.2437, abs=5e-5)
    for u in [(2,), (0, 1), (1, 2), (0, 1, 2)]:
        assert s.partial(u) == 0.0
    assert sum(s.interactions.values()) == pytest.approx(1.0, abs=1e-12)
    pi = math.pi
    assert s.variance == pytest.approx(49 / 8 + 0.1 * pi**4 / 5 + 0.01 * pi**8 / 18 + 0.5)


def test_analytic_ishigami_without_interaction():
    s = analytic_ishigami(b=0.0)
    assert s.partial((0, 2)) == 0.0
    assert s.total[2] == 0.0


def test_additive_quadratic_mc_vs_pce():
    # x1^2 + x2 = 1 + sqrt(2) psi_2(x1) + psi_1(x2) in orthonormal Hermite terms
    im = gaussian_model(2)
    exact = PceModel(im, [[0, 0], [0, 1], [2, 0]], [1.0, 1.0, math.sqrt(2)], 2, 0.0)
    s = indices_from_pce(exact)
    np.testing.assert_allclose(s.first_order, [2 / 3, 1 / 3], rtol=1e-12)
    mc = mc_sobol(lambda X: X[:, 0] ** 2 + X[:, 1], im, n=20_000, seed=3)
    assert np.all(np.abs(mc.first_order - s.first_order) <= 3 * mc.first_order_se)
    assert np.all(np.abs(mc.total - s.total) <= 3 * mc.total_se)
    # the fitted model object is accepted in place of the function
    via_model = mc_sobol(exact, im, n=20_000, seed=3)
    np.testing.assert_allclose(via_model.first_order, mc.first_order, rtol=1e-10)


def test_mc_ishigami_first_order():
    mc = mc_sobol(ishigami, ishigami_model(), n=1_000_000, seed=1)
    ref = analytic_ishigami()
    assert mc.first_order[0] == pytest.approx(ref.first_order[0], abs=0.01)
    assert mc.total[2] == pytest.approx(ref.total[2], abs=0.01)


def test_mc_constant_function_flags_zero_variance():
    mc = mc_sobol(lambda X: np.full(len(X), 2.0), gaussian_model(3), n=1000)
    assert mc.zero_variance
    assert np.all(np.isnan(mc.first_order))


def test_fitted_model_agrees_with_mc():
    im = ishigami_model()
    ed = lhs_sample(im, 120, seed=2).evaluate(ishigami)
    m = build_sparse(ed, im, "lars", p_max=10)
    s = indices_from_pce(m)
    mc = mc_sobol(m, im, n=200_000, seed=4)
    assert np.all(np.abs(mc.first_order - s.first_order) <= 4 * mc.first_order_se + 1e-3)


def test_csv_layout():
    s = indices_from_pce(PceModel(gaussian_model(3), [[0, 0, 0], [1, 0, 0], [1, 0, 1]], [0.0, 1.0, 1.0], 2, 0.0))
    lines = s.to_csv().splitlines()
    assert lines[0] == "subset,S,S_total"
    assert lines[1] == "1,0.5,1.0"
    assert lines[2] == "2,0.0,0.0"
    assert lines[4] == "1 3,0.5,"
