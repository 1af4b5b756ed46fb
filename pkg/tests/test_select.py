import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import naive_lars_order

from rpcekit.regress import loo_path
from rpcekit.select import lars_rank, omp_rank, rank_batch


def centered(X, y):
    return X - X.mean(axis=0), y - y.mean()


def test_omp_exact_column():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=(20, 8))
    rb = omp_rank(psi, 2.5 * psi[:, 5])
    assert rb.order[0] == 5
    assert rb.eps_path[0] == pytest.approx(0.0, abs=1e-20)


def test_omp_first_pick_is_brute_force_argmax():
    rng = np.random.default_rng(1)
    for _ in range(20):
        psi = rng.normal(size=(15, 30)) * rng.uniform(0.2, 3.0, size=30)
        y = rng.normal(size=15)
        brute = np.argmax(np.abs(psi.T @ y) / np.linalg.norm(psi, axis=0))
        assert omp_rank(psi, y, j_max=1).order[0] == brute
        raw = np.argmax(np.abs(psi.T @ y))
        assert omp_rank(psi, y, j_max=1, normalize=False).order[0] == raw


def test_omp_residual_non_increasing():
    rng = np.random.default_rng(2)
    psi, y = rng.normal(size=(25, 40)), rng.normal(size=25)
    order = omp_rank(psi, y).order
    res = [np.linalg.norm(y - psi[:, order[:j]] @ np.linalg.lstsq(psi[:, order[:j]], y, rcond=None)[0])
           for j in range(1, len(order) + 1)]
    assert np.all(np.diff(res) <= 1e-10)


def test_omp_exact_recovery_orthogonal():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(30, 30)))
    support = [4, 17, 22]
    y = q[:, support] @ np.array([3.0, -2.0, 1.0])
    assert sorted(omp_rank(q, y, j_max=3).order) == support


def test_lars_orthonormal_order():
    rng = np.random.default_rng(4)
    # orthonormal columns spanning a zero-mean subspace are unchanged by centering
    z = rng.normal(size=(30, 10))
    q, _ = np.linalg.qr(z - z.mean(axis=0))
    y = q @ rng.normal(size=10)
    expected = np.argsort(-np.abs(q.T @ y), kind="stable")
    assert list(lars_rank(q, y).order) == list(expected)


def test_lars_single_column():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(10, 1))
    y = 3 * x[:, 0] + rng.normal(size=10)
    rb = lars_rank(x, y)
    assert list(rb.order) == [0]
    eps, _, _ = loo_path(x, y)
    np.testing.assert_allclose(rb.eps_path, eps)


def test_lars_two_column_hand_trace():
    # correlated pair rho = 0.6 on centered unit columns
    rng = np.random.default_rng(6)
    z = np.linalg.qr(rng.normal(size=(50, 3)) - rng.normal(size=(50, 3)).mean(axis=0))[0]
    z -= z.mean(axis=0)
    z /= np.linalg.norm(z, axis=0)
    x1 = z[:, 0]
    x2 = 0.6 * z[:, 0] + 0.8 * z[:, 1]
    X = np.column_stack([x1, x2])
    y = 1.0 * x1 + 2.0 * x2 + 0.1 * z[:, 2]
    c = X.T @ y
    first = int(np.argmax(np.abs(c)))
    assert list(lars_rank(X, y).order) == [first, 1 - first]


def test_lars_matches_textbook_oracle():
    rng = np.random.default_rng(7)
    for trial in range(5):
        X, y = rng.normal(size=(30, 50)), rng.normal(size=30) + 2 * rng.normal(size=30)
        Xc, yc = centered(X, y)
        assert list(lars_rank(X, y).order) == naive_lars_order(Xc, yc, 29)


def test_lars_constant_column_leads():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 20))
    X[:, 3] = 1.0
    y = rng.normal(size=30) + 5.0
    order = list(lars_rank(X, y).order)
    assert order[0] == 3
    rest = naive_lars_order(np.delete(X, 3, axis=1) - np.delete(X, 3, axis=1).mean(axis=0), y - y.mean(), 28)
    assert order[1:] == [j + (j >= 3) for j in rest]


def test_lars_equicorrelation():
    rng = np.random.default_rng(9)
    X, y = rng.normal(size=(40, 25)), rng.normal(size=40)
    Xc, yc = centered(X, y)
    Xc /= np.linalg.norm(Xc, axis=0)
    order = list(lars_rank(X, y).order)
    # replay the path to check the equal-correlation invariant at each step
    r = yc.copy()
    active = [order[0]]
    for k in range(1, len(order)):
        c = Xc.T @ r
        C = np.max(np.abs(c[active]))
        np.testing.assert_allclose(np.abs(c[active]), C, rtol=1e-9)
        inactive = np.setdiff1d(np.arange(25), active)
        assert np.all(np.abs(c[inactive]) <= C * (1 + 1e-9))
        s = np.sign(c[active])
        XA = Xc[:, active] * s
        w = np.linalg.solve(XA.T @ XA, np.ones(len(active)))
        A = 1 / np.sqrt(w.sum())
        u = XA @ (A * w)
        a = Xc.T @ u
        j = order[k]
        g = [v for v in ((C - c[j]) / (A - a[j]), (C + c[j]) / (A + a[j])) if v > 0]
        r = r - min(g) * u
        active.append(j)


def test_ties_go_to_lowest_index():
    x = np.array([1.0, -1.0, 2.0, 0.5])
    psi = np.column_stack([x, x * 2, x])
    assert omp_rank(psi, x, j_max=1).order[0] == 0


def test_batch_equals_single_runs():
    rng = np.random.default_rng(10)
    psi, y = rng.normal(size=(24, 60)), rng.normal(size=24)
    masks = rng.random((6, 24)) < 0.75
    methods = ["omp", "lars"] * 3
    batch = rank_batch(psi, y, masks, methods)
    for m, meth, order in zip(masks, methods, batch):
        f = omp_rank if meth == "omp" else lars_rank
        assert list(order) == list(f(psi[m], y[m]).order)


def test_delta_eps_prefix_sums():
    rng = np.random.default_rng(11)
    psi, y = rng.normal(size=(20, 30)), rng.normal(size=20)
    for rb in (omp_rank(psi, y), lars_rank(psi, y)):
        np.testing.assert_allclose(np.cumsum(rb.delta_eps), rb.eps_path, rtol=1e-12)
        assert len(rb.order) <= 19
        assert rb.delta_eps[0] == rb.eps_path[0]


def test_determinism():
    rng = np.random.default_rng(12)
    psi, y = rng.normal(size=(20, 40)), rng.normal(size=20)
    assert np.array_equal(lars_rank(psi, y).order, lars_rank(psi, y).order)
    assert np.array_equal(omp_rank(psi, y).order, omp_rank(psi, y).order)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 25), st.integers(2, 40), st.integers(0, 10_000))
def test_lars_oracle_property(N, P, seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(N, P)), rng.normal(size=N)
    order = list(lars_rank(X, y).order)
    Xc, yc = centered(X, y)
    ref = naive_lars_order(Xc, yc, len(order))
    assert order == ref[: len(order)]
