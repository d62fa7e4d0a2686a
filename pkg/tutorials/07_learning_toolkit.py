"""
The in-repo learning toolkit
============================

Regression adjustment and quantile methods need weighted least squares,
regression forests with leaf co-occupancy weights, boosted trees under
several losses and a small neural network. They live in ``cpfabc.mlkit``
and are deterministic given a seed.
"""
import numpy as np

from cpfabc.mlkit import forest_fit, forest_quantiles, gbm_fit, nn_fit, weighted_quantile, wls_fit

rng = np.random.default_rng(0)
X = rng.uniform(-2, 2, size=(2000, 3))
y = np.sin(2 * X[:, 0]) + 0.3 * X[:, 1] + (0.2 + 0.2 * np.abs(X[:, 0])) * rng.normal(size=2000)
grid = np.column_stack([np.linspace(-2, 2, 5), np.zeros(5), np.zeros(5)])

# %%
# Weighted quantiles use the inverted-CDF rule; integer weights act like
# repetitions.
print("weighted median:", weighted_quantile([1.0, 2.0, 3.0], 0.5, [1, 1, 5]))

# %%
# Weighted least squares with an intercept.
fit = wls_fit(X, y, rng.random(2000))
print("WLS coefficients:", np.round(fit.coef, 3))

# %%
# A quantile regression forest: one set of trees, any quantile.
rf = forest_fit(X, y, n_trees=200, seed=1)
print("forest 5/50/95% at x0 = -2..2:\n", np.round(forest_quantiles(rf, grid, [0.05, 0.5, 0.95]), 2))

# %%
# Boosting with the pinball loss estimates one quantile per model.
for alpha in (0.05, 0.95):
    m = gbm_fit(X, y, ("pinball", alpha), stages=200, seed=1)
    print(f"boosted {alpha:.0%} quantile:", np.round(m.predict(grid), 2))

# %%
# A one-hidden-layer network trained by L-BFGS.
net = nn_fit(X, y, hidden=8, weight_decay=1e-3, max_iter=400, seed=1)
print("network mean:", np.round(net.predict(grid), 2), " truth:", np.round(np.sin(2 * grid[:, 0]), 2))
