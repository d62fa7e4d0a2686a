import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cpfabc.errors import TrainingError
from cpfabc.mlkit import (Loss, build_tree, forest_fit, forest_quantiles, gbm_fit, gbm_predict, nn_fit,
                          presort, weighted_quantile, wls_fit)
from cpfabc.mlkit.nn import objective


# -- weighted quantiles ------------------------------------------------------

def test_weighted_quantile_unweighted_matches_inverted_cdf(rng):
    v = rng.normal(size=37)
    p = np.linspace(0, 1, 23)
    assert np.array_equal(weighted_quantile(v, p), np.quantile(v, p, method="inverted_cdf"))


@settings(max_examples=60)
@given(arrays(float, st.integers(1, 30), elements=st.floats(-1e3, 1e3)),
       st.lists(st.integers(0, 4), min_size=30, max_size=30), st.floats(0, 1))
def test_integer_weights_equal_repetition(v, reps, p):
    w = np.array(reps[: v.size], dtype=float)
    if w.sum() == 0:
        w[0] = 1
    expanded = np.repeat(v, w.astype(int))
    assert weighted_quantile(v, p, w) == np.quantile(expanded, p, method="inverted_cdf")


def test_weighted_quantile_errors():
    with pytest.raises(ValueError):
        weighted_quantile([1, 2], 1.5)
    with pytest.raises(ValueError):
        weighted_quantile([1, 2], 0.5, [0, 0])
    with pytest.raises(ValueError):
        weighted_quantile([1, 2], 0.5, [1, -1])


# -- weighted least squares --------------------------------------------------

def test_wls_matches_dense_normal_equations(rng):
    X = rng.normal(size=(200, 6))
    y = X @ rng.normal(size=6) + 1.5 + rng.normal(size=200)
    w = rng.random(200)
    fit = wls_fit(X, y, w)
    A = np.column_stack([np.ones(200), X])
    beta = np.linalg.solve(A.T @ (w[:, None] * A), A.T @ (w * y))
    assert np.allclose(fit.coef, beta, rtol=1e-8, atol=1e-10)
    assert fit.full_rank and fit.intercept == pytest.approx(beta[0])
    assert np.allclose(fit.residuals, y - A @ beta, atol=1e-8)


def test_wls_zero_weights_and_rank():
    X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    fit = wls_fit(X, np.arange(10.0), np.r_[np.zeros(3), np.ones(7)])
    assert not fit.full_rank
    assert np.allclose(fit.predict(X), np.arange(10.0))
    with pytest.raises(ValueError):
        wls_fit(X, np.arange(10.0), np.zeros(10))


# -- trees -------------------------------------------------------------------

def test_presort_dense_ranks():
    X = np.array([[3.0, 1.0], [1.0, 1.0], [3.0, 0.0], [2.0, 5.0]])
    order, rank = presort(X)
    assert order[0].tolist() == [1, 3, 0, 2]
    assert rank[0].tolist() == [0, 1, 2, 2]
    assert rank[1].tolist() == [0, 1, 1, 2]


def test_tree_finds_exact_step_and_midpoint():
    x = np.arange(20.0)[:, None]
    y = (x[:, 0] > 6.5).astype(float) * 3.0
    tree, node_of = build_tree(x, presort(x), y, np.ones(20), np.ones(20, np.int64))
    assert tree.feature[0] == 0 and tree.threshold[0] == 6.5
    assert np.allclose(tree.predict(x), y)
    assert np.array_equal(tree.apply(x), node_of)


def test_tree_tie_breaks_toward_lowest_feature():
    x = np.arange(10.0)
    X = np.column_stack([x, x, x])
    y = (x > 4).astype(float)
    tree, _ = build_tree(X, presort(X), y, np.ones(10), np.ones(10, np.int64))
    assert tree.feature[0] == 0


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8))
def test_tree_min_leaf_and_partition(seed, min_leaf):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(60, 3)).astype(float)
    y = rng.normal(size=60)
    cnt = rng.integers(0, 3, size=60)
    cnt[0] = 1
    tree, node_of = build_tree(X, presort(X), y, cnt.astype(float), cnt, -1, min_leaf, 2, seed)
    leaves = tree.apply(X)
    active = cnt > 0
    assert np.array_equal(node_of[active], leaves[active])
    assert np.all(node_of[~active] == -1)
    for leaf in np.unique(leaves[active]):
        sel = active & (leaves == leaf)
        assert cnt[sel].sum() >= min(min_leaf, cnt.sum())
        assert tree.value[leaf] == pytest.approx(np.average(y[sel], weights=cnt[sel]))


# -- forests -----------------------------------------------------------------

def test_single_leaf_forest_is_weighted_mean(rng):
    X = rng.normal(size=(50, 3))
    y = rng.normal(size=50)
    w = rng.random(50)
    rf = forest_fit(X, y, w, n_trees=5, bootstrap=False, max_depth=0)
    assert np.allclose(rf.predict(X), np.average(y, weights=w), rtol=1e-12)
    qw = rf.quantile_weights(X[:2])
    assert np.allclose(qw, w / w.sum())


def test_forest_learns_and_is_deterministic(rng):
    X = rng.uniform(-1, 1, size=(400, 4))
    y = np.sin(3 * X[:, 0]) + 0.1 * rng.normal(size=400)
    a = forest_fit(X, y, n_trees=60, seed=3)
    b = forest_fit(X, y, n_trees=60, seed=3)
    assert np.array_equal(a.predict(X), b.predict(X))
    assert np.mean((a.oob_predict() - y) ** 2) < 0.2 * np.var(y)
    qw = a.quantile_weights(X[:5])
    assert np.allclose(qw.sum(axis=1), 1.0)
    q = forest_quantiles(a, X[:5])
    assert np.all(np.diff(q, axis=1) >= 0)


def test_forest_bad_args():
    with pytest.raises(ValueError):
        forest_fit(np.zeros((3, 2)), np.zeros(3), mtry=3)
    with pytest.raises(ValueError):
        forest_fit(np.zeros((3, 2)), np.zeros(3), w=-np.ones(3))


# -- boosting ----------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_pinball_gbm_on_noise_finds_quantile(alpha):
    rng = np.random.default_rng(8)
    n = 5000
    X = rng.normal(size=(n, 3))
    y = rng.lognormal(1.0, 0.5, size=n)
    model = gbm_fit(X, y, ("pinball", alpha), stages=100, seed=1)
    target = np.quantile(y, alpha, method="inverted_cdf")
    fresh = model.predict(rng.normal(size=(n, 3)))
    assert abs(fresh.mean() / target - 1) < 0.02
    assert np.mean(y <= model.predict(X)) == pytest.approx(alpha, abs=0.01)


@pytest.mark.parametrize("alpha", [0.1, 0.9])
def test_pinball_gbm_without_features_is_the_quantile(alpha):
    rng = np.random.default_rng(2)
    y = rng.normal(5.0, 1.0, size=1000)
    model = gbm_fit(np.zeros((1000, 2)), y, ("pinball", alpha), stages=20)
    assert model.predict([[0.0, 0.0]])[0] == pytest.approx(np.quantile(y, alpha, method="inverted_cdf"), rel=1e-12)


def test_l2_gbm_loss_is_monotone(rng):
    X = rng.normal(size=(300, 5))
    y = X[:, 0] ** 2 + X[:, 1] + 0.1 * rng.normal(size=300)
    m = gbm_fit(X, y, "l2", stages=150, seed=2)
    assert np.all(np.diff(m.train_loss) <= 1e-12)
    assert m.train_loss[-1] < 0.3 * np.var(y)
    assert np.allclose(gbm_predict(m, X), m.predict(X))
    assert m.predict(X[:3], stages=0) == pytest.approx(np.full(3, y.mean()))


def test_l1_gbm_base_is_median(rng):
    y = rng.exponential(size=101)
    m = gbm_fit(rng.normal(size=(101, 2)), y, "l1", stages=1, seed=0)
    assert m.base == np.median(y)


def test_loss_parsing():
    assert Loss.parse("pinball:0.9") == Loss("pinball", 0.9)
    assert Loss.parse(("pinball", 0.1)).alpha == 0.1
    assert Loss.parse("L1").kind == "l1"
    with pytest.raises(ValueError):
        Loss.parse("huber")
    with pytest.raises(ValueError):
        Loss("pinball", 1.0)


def test_gbm_rejects_non_finite():
    with pytest.raises(TrainingError):
        gbm_fit(np.array([[np.nan], [1.0]]), [1.0, 2.0])


# -- networks ----------------------------------------------------------------

@pytest.mark.parametrize("h,wd", [(1, 0.0), (4, 1e-3), (8, 0.1)])
def test_nn_gradient_matches_finite_differences(h, wd):
    rng = np.random.default_rng(h)
    n, d = 40, 3
    Z = rng.normal(size=(n, d))
    t = rng.normal(size=n)
    wn = rng.random(n)
    wn /= wn.sum()
    theta = rng.normal(size=d * h + 2 * h + 1)
    _, g = objective(theta, Z, t, wn, d, h, wd)

    def f(x):
        return objective(x, Z, t, wn, d, h, wd)[0]

    eps = 1e-6
    num = np.array([(f(theta + eps * e) - f(theta - eps * e)) / (2 * eps) for e in np.eye(theta.size)])
    assert np.allclose(g, num, rtol=1e-5, atol=1e-8)


def test_nn_fits_smooth_function(rng):
    X = rng.uniform(-2, 2, size=(300, 2))
    y = np.tanh(X[:, 0]) + 0.5 * X[:, 1]
    fit = nn_fit(X, y, hidden=6, weight_decay=1e-5, max_iter=800, seed=1)
    assert np.mean((fit.predict(X) - y) ** 2) < 0.01 * np.var(y)


def test_nn_one_hidden_unit_reaches_linear_fit(rng):
    X = rng.normal(size=(200, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 3.0
    w = rng.random(200)
    lin = wls_fit(X, y, w)
    lin_loss = np.average(lin.residuals ** 2, weights=w)
    fit = nn_fit(X, y, w, hidden=1, weight_decay=0.0, max_iter=5000, seed=0)
    nn_loss = np.average((fit.predict(X) - y) ** 2, weights=w)
    assert nn_loss < lin_loss + 1e-6 * np.var(y) + 1e-6


def test_nn_gd_option_and_divergence(rng):
    X = rng.normal(size=(50, 2))
    y = X[:, 0]
    fit = nn_fit(X, y, hidden=3, optimizer="gd", max_iter=300, step=0.2)
    assert np.mean((fit.predict(X) - y) ** 2) < 0.5 * np.var(y)
    with pytest.raises(TrainingError):
        nn_fit(X, y, hidden=3, optimizer="gd", max_iter=200, step=1e6)
    with pytest.raises(ValueError):
        nn_fit(X, y, optimizer="adam")
