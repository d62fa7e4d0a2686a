import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cpfabc.cpf import CpfParams
from cpfabc.errors import ConfigError, FormatError
from cpfabc.landscape import default_profiles, synthetic_raster
from cpfabc.obsmodel import (RATE_CAP, Dataset, FieldStore, ObsParams, ParamVector, PriorSpec,
                             SurveyDesign, SurveySite, loglik_oracle, param_names, sample_counts,
                             sample_prior, sample_prior_array, simulate_dataset, synthetic_design)


@pytest.fixture(scope="module")
def world():
    rasters = [synthetic_raster(20, 20, 30.0, seed=k, id=f"L{k}") for k in range(2)]
    store = FieldStore(rasters, default_profiles(3), seed=5)
    design = synthetic_design(rasters, [1, 2, 4], 2, (0, 1), 3, seed=2)
    return store, design


def test_param_vector_roundtrip():
    v = np.array([500.0, 0.1, 300.0, 400.0, 1.0, -2.0, 0.5, 0.7])
    psi = ParamVector.from_array(v)
    assert np.array_equal(psi.to_array(), v)
    assert psi.names() == param_names(3) == ["tau0", "f0", "a", "b", "beta1", "beta2", "beta3", "sigma2"]
    assert psi.omega.log_scale(1) == 1.0 and psi.omega.log_scale(2) == -1.0
    for bad in ([1, 2, 3], v * np.r_[1, 1, 1, 1, 1, 1, 1, -1], v * np.r_[0, 1, 1, 1, 1, 1, 1, 1]):
        with pytest.raises(ValueError):
            ParamVector.from_array(bad)


def test_prior_validation():
    with pytest.raises(ConfigError):
        PriorSpec(a_low=10, a_high=5)
    with pytest.raises(ConfigError):
        PriorSpec(beta_var=0)


def test_prior_marginals_match_cdfs():
    prior = PriorSpec()
    draws = sample_prior_array(prior, 20000, 1)
    assert draws[:, 0].max() <= prior.tau0_upper
    for j, cdf in enumerate(prior.marginal_cdfs()):
        assert stats.kstest(draws[:, j], cdf).pvalue > 1e-3, prior.names()[j]


def test_scalar_and_vector_prior_agree_in_law():
    prior = PriorSpec(n_periods=2)
    one = np.array([sample_prior(prior, s).to_array() for s in range(2000)])
    many = sample_prior_array(prior, 2000, 7)
    for j in range(prior.dim):
        assert stats.ks_2samp(one[:, j], many[:, j]).pvalue > 1e-3


def test_design_validation():
    s = SurveySite(0, "L", 1, (3, 4), 10.0)
    with pytest.raises(ValueError):
        SurveyDesign((s,), 3, ((0, 0, 4),))
    with pytest.raises(ValueError):
        SurveyDesign((s,), 3, ((1, 0, 1),))
    with pytest.raises(ValueError):
        SurveyDesign((s, s), 3, ())
    with pytest.raises(ValueError):
        SurveySite(1, "L", 1, (), 1.0)
    d = SurveyDesign.full([s], [1, 0], 2)
    assert d.records == ((0, 0, 1), (0, 0, 2), (0, 1, 1), (0, 1, 2))


def test_dataset_csv_roundtrip(tmp_path, world):
    store, design = world
    psi = sample_prior(PriorSpec(), 3)
    data = simulate_dataset(psi, design, store, 11)
    data.to_csv(tmp_path / "d.csv")
    back = Dataset.from_csv(tmp_path / "d.csv")
    assert back.as_mapping() == data.as_mapping()
    assert np.array_equal(back.aligned_counts(design), data.count)
    (tmp_path / "bad.csv").write_text("site,year,period,count\n1,2,3,4\n")
    with pytest.raises(FormatError):
        Dataset.from_csv(tmp_path / "bad.csv")
    with pytest.raises(ValueError):
        Dataset([0, 0], [0, 0], [1, 1], [1, 1], [1, 2])


def test_simulation_is_deterministic_and_order_free(world):
    store, design = world
    psi = sample_prior(PriorSpec(), 4)
    a = simulate_dataset(psi, design, store, 99)
    b = simulate_dataset(psi, design, store, 99)
    assert np.array_equal(a.count, b.count)
    # a design listing the records of a sub-set gives the same values for them
    sub = SurveyDesign(design.sites, design.n_periods, design.records[::-1][:10])
    c = simulate_dataset(psi, sub, store, 99)
    full = a.as_mapping()
    assert all(full[k] == v for k, v in c.as_mapping().items())


def test_zero_intensity_gives_zero_counts(world):
    _, design = world
    psi = ParamVector(CpfParams(100, 0.1, 300, 300), ObsParams((50.0, 0.0, 0.0), 4.0))
    nu = {k: 0.0 for k in design.records}
    assert np.all(simulate_dataset(psi, design, nu, 1).count == 0)
    with pytest.raises(ConfigError):
        simulate_dataset(psi, design, {}, 1)


def test_rate_cap():
    rng = np.random.default_rng(0)
    y = sample_counts(np.full(5, 1e10), 1e3, 50.0, 1.0, rng)
    assert np.all(y <= 2 * RATE_CAP) and np.all(y > 0)


def test_record_intensity_is_patch_mean(world):
    from cpfabc.cpf import visitation_field

    store, design = world
    theta = CpfParams(900.0, 0.15, 400.0, 300.0)
    nu = store.record_intensities(theta, design)
    for r in (0, 7, len(design.records) - 1):
        i, j, k = design.records[r]
        site = design.site(i)
        field = visitation_field(store.attributes(site.landscape, j, k), theta).nu.ravel()
        assert nu[r] == pytest.approx(field[list(site.patches)].mean(), rel=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 40), st.floats(0.05, 50.0), st.floats(-3, 3), st.floats(0.05, 3.0))
def test_oracle_is_normalised_sum(y, nu, beta, sigma2):
    lp = loglik_oracle(y, 10.0, nu, beta, sigma2)
    assert np.isfinite(lp) and lp <= 0.0


def test_oracle_pmf_sums_to_one():
    p = sum(math.exp(loglik_oracle(y, 5.0, 2.0, 0.3, 0.5)) for y in range(4000))
    assert p == pytest.approx(1.0, abs=1e-7)


def test_oracle_matches_poisson_limit():
    # sigma2 -> 0 gives the Poisson law
    lp = loglik_oracle(4, 2.0, 1.5, 0.0, 1e-10)
    assert lp == pytest.approx(stats.poisson.logpmf(4, 3.0), rel=1e-6)


def test_synthetic_design_places_sites_on_habitat(world):
    store, design = world
    for s in design.sites:
        raster = store.rasters[s.landscape]
        assert raster.landuse.ravel()[s.patches[0]] == s.habitat
        assert len(s.patches) == 3
    with pytest.raises(ConfigError):
        synthetic_design([synthetic_raster(5, 5, 10.0, category_weights={0: 1.0})], [1])
