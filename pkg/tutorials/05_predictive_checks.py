"""
Posterior predictive checks
===========================

Quantile methods only report three quantiles per parameter. A generalised
lognormal, a shifted normal or lognormal fitted exactly to those three
values, turns them back into a distribution that can be sampled. Predicted
datasets are then compared with the observation through Bayesian p-values
and a PCA of the summary statistics.
"""
import numpy as np

from cpfabc.abc import PosteriorResult
from cpfabc.evaluation import bayes_pvalues, fit_gln, pca_check, posterior_predictive
from cpfabc.landscape import default_profiles, synthetic_raster
from cpfabc.obsmodel import FieldStore, ParamVector, simulate_dataset, synthetic_design
from cpfabc.sumstats import build_spec, summarize

# %%
# Three shapes: symmetric triplets give a normal, skewed ones a lognormal
# opening to the right or to the left.
for q in ((-2.0, 0.0, 2.0), (1.0, 2.0, 7.0), (-7.0, -2.0, -1.0)):
    g = fit_gln(*q)
    print(f"{q} -> {g.shape:16s} round trip {np.round(g.ppf([0.025, 0.5, 0.975]), 12)}")

# %%
# A closed loop on a small world: simulate at a known vector, then predict
# from a posterior that reports quantiles around it.
rasters = [synthetic_raster(30, 30, 30.0, seed=k, id=f"L{k}") for k in range(2)]
store = FieldStore(rasters, default_profiles(), seed=1)
design = synthetic_design(rasters, [1, 2, 4], 2, [0, 1], seed=2)
truth = np.array([600.0, 0.1, 500.0, 500.0, -3.0, 0.5, -0.5, 0.5])
obs = simulate_dataset(ParamVector.from_array(truth), design, store, seed=3)

spread = np.array([50.0, 0.01, 30.0, 30.0, 0.2, 0.2, 0.2, 0.1])
q = np.column_stack([truth - spread, truth, truth + spread])
names = ["tau0", "f0", "a", "b", "beta1", "beta2", "beta3", "sigma2"]
post = PosteriorResult("uwqrf", None, names, q, truth, truth, np.zeros(8, bool))
ens = posterior_predictive(post, design, store, n_draws=200, seed=4)
print(f"\n{len(ens)} predicted datasets, {ens.redraws} redraw rounds for invalid parameters")

# %%
# Mid-p values put every tie at one half, so records that are zero in
# every draw land exactly on 0.5. Passing an rng splits ties at random.
pv = bayes_pvalues(ens, obs)
pr = bayes_pvalues(ens, obs, rng=0)
print("mid-p histogram     ", np.histogram(pv, bins=5, range=(0, 1))[0])
print("randomized histogram", np.histogram(pr, bins=5, range=(0, 1))[0])

# %%
# PCA of the summary statistics: the observation should sit inside the
# cloud of predictions.
spec = build_spec(design)
pred_stats = np.array([summarize(d, spec).values for d in ens.datasets()])
pca = pca_check(pred_stats, pred_stats, summarize(obs, spec).values)
print("explained variance of first axes", np.round(pca.explained[:3], 3))
print("observation on axis 1: %.2f, predictions span [%.2f, %.2f]"
      % (pca.observed[0], pca.predicted[:, 0].min(), pca.predicted[:, 0].max()))
