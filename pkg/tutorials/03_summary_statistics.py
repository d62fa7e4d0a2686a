"""
Summary statistics and kernel weights
=====================================

Raw counts are reduced to an interquartile range and a zero count per
group, with groups defined by landscape and by habitat within each year
and period. Statistics are scaled robustly before distances are taken,
and an Epanechnikov kernel turns distances into weights.
"""
import numpy as np

from cpfabc.landscape import default_profiles, synthetic_raster
from cpfabc.obsmodel import (FieldStore, ParamVector, PriorSpec, sample_prior_array, simulate_dataset,
                             synthetic_design)
from cpfabc.sumstats import build_spec, kernel_weights, scale_statistics, summarize

rasters = [synthetic_raster(30, 30, 30.0, seed=k, id=f"L{k}") for k in range(2)]
store = FieldStore(rasters, default_profiles(), seed=1)
design = synthetic_design(rasters, [1, 2, 4], 2, [0, 1], seed=2)
spec = build_spec(design)
print(f"{spec.dim} statistics, layout hash {spec.hash[:12]}")
print("first names:", spec.names()[:4])

# %%
# A small table of simulated statistics from prior draws.
prior = PriorSpec()
P = sample_prior_array(prior, 300, seed=5)
S = np.array([summarize(simulate_dataset(ParamVector.from_array(p), design, store, k), spec).values
              for k, p in enumerate(P)])

# %%
# Scaling uses the median and the median absolute deviation. Columns that
# are mostly zero fall back to the mean absolute deviation.
scaler = scale_statistics(S)
print("spread of first 6 columns:", np.round(scaler.spread[:6], 2))

# %%
# Weights around the first row, which is its own nearest neighbour. With
# epsilon = 5% the bandwidth is the 15th smallest distance; that row sits
# on the kernel boundary and gets weight zero.
kw = kernel_weights(S, S[0], 0.05, scaler)
print("rows with positive weight:", kw.support.size, " bandwidth %.3f" % kw.bandwidth)
print("largest weights:", np.round(np.sort(kw.weights)[::-1][:5], 3))
