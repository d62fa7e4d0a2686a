import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cpfabc.obsmodel import Dataset, SurveyDesign, SurveySite
from cpfabc.sumstats import (build_spec, kernel_weights, scale_statistics, summarize, summarize_counts,
                             weights_from_distances)


def _design():
    sites = [SurveySite(0, "A", 1, (0,), 1.0), SurveySite(1, "A", 2, (1,), 1.0),
             SurveySite(2, "B", 1, (0,), 1.0), SurveySite(3, "B", 1, (5,), 1.0)]
    return SurveyDesign.full(sites, [0], 2)


def test_spec_layout_and_names():
    spec = build_spec(_design())
    labels = [g[0] for g in spec.groups]
    assert labels == [("L", "A", 0, 1), ("L", "A", 0, 2), ("L", "B", 0, 1), ("L", "B", 0, 2),
                      ("H", 1, 0, 1), ("H", 1, 0, 2), ("H", 2, 0, 1), ("H", 2, 0, 2)]
    assert spec.dim == 16 and spec.names()[:2] == ["iqr_L_A_0_1", "zeros_L_A_0_1"]
    assert spec.hash == build_spec(_design()).hash


def test_hand_computed_statistics():
    design = _design()
    spec = build_spec(design)
    # records: (site, year, period) for sites 0..3, periods 1..2
    counts = np.array([0, 4, 2, 0, 7, 1, 10, 1])
    s = summarize_counts(counts, spec)
    # L,A,1: sites 0,1 period 1 -> [0, 2]
    assert s[0] == pytest.approx(np.subtract(*np.percentile([0, 2], [75, 25])))
    assert s[1] == 1
    # H,1,2: sites 0,2,3 period 2 -> [4, 1, 1]
    h12 = 2 * 5
    assert s[h12] == pytest.approx(np.subtract(*np.percentile([4, 1, 1], [75, 25])))
    assert s[h12 + 1] == 0


def test_empty_group_sentinel():
    sites = [SurveySite(0, "A", 1, (0,), 1.0), SurveySite(1, "B", 2, (0,), 1.0)]
    design = SurveyDesign.full(sites, [0], 1)
    spec = build_spec(design)
    assert spec.dim == 8
    # a record missing from the dataset drops out of its groups
    data = Dataset([0], [0], [1], [1], [3])
    v = summarize(data, spec).values
    assert v[2:4].tolist() == [0.0, 0.0]  # landscape B group now empty


@settings(max_examples=50)
@given(arrays(np.int64, 8, elements=st.integers(0, 10**6)))
def test_statistics_bounds_and_batch_agreement(counts):
    spec = build_spec(_design())
    s = summarize_counts(counts, spec)
    assert np.all(s >= 0)
    for (_, idx), iqr, z in zip(spec.groups, s[0::2], s[1::2]):
        assert z <= len(idx)
        assert iqr <= counts[list(idx)].max() - counts[list(idx)].min() + 1e-9
    batch = summarize_counts(np.vstack([counts, counts[::-1]]), spec)
    assert np.array_equal(batch[0], s)
    assert np.array_equal(batch[1], summarize_counts(counts[::-1], spec))


def test_summarize_matches_counts_path():
    design = _design()
    spec = build_spec(design)
    counts = np.arange(8)
    d = Dataset.from_counts(design, counts)
    assert np.array_equal(summarize(d, spec).values, summarize_counts(counts, spec))


def test_scaler_mad_and_fallbacks():
    t = np.array([[1.0, 5.0, 0.0], [2.0, 5.0, 0.0], [3.0, 5.0, 0.0], [4.0, 5.0, 0.0], [10.0, 5.0, 6.0]])
    sc = scale_statistics(t)
    assert sc.center.tolist() == [3.0, 5.0, 0.0]
    assert sc.spread[0] == 1.0  # median of |t - 3| = 1
    assert sc.spread[1] == 1.0  # constant column
    assert sc.spread[2] == pytest.approx(6.0 / 5)  # zero MAD, mean absolute deviation instead
    assert np.all(np.isfinite(sc.transform(t)))


@settings(max_examples=50)
@given(arrays(float, st.integers(1, 200), elements=st.floats(0, 100)), st.floats(0.001, 1.0))
def test_kernel_weight_invariants(d, eps):
    kw = weights_from_distances(d, eps)
    k = int(np.ceil(eps * d.size - 1e-9))
    assert kw.weights.sum() == pytest.approx(1.0)
    assert np.all(kw.weights >= 0)
    assert kw.support.size <= max(k, np.count_nonzero(d <= kw.bandwidth))
    assert np.all(kw.weights[d > kw.bandwidth] == 0)
    # closer rows never get less weight
    order = np.argsort(d, kind="stable")
    w = kw.weights[order]
    assert np.all(np.diff(w) <= 1e-15)


def test_kernel_shape():
    d = np.array([0.0, 1.0, 2.0, 3.0])
    kw = weights_from_distances(d, 0.75)
    assert kw.bandwidth == 2.0
    raw = np.array([1.0, 0.75, 0.0, 0.0])
    assert np.allclose(kw.weights, raw / raw.sum())
    with pytest.raises(ValueError):
        weights_from_distances(d, 0.0)


def test_kernel_weights_on_table(rng):
    t = rng.normal(size=(500, 4))
    kw = kernel_weights(t, t[3], 0.1)
    assert kw.weights[3] == kw.weights.max()
    assert kw.support.size <= 50
