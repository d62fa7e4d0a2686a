import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_visitation, random_attrs, random_theta
from cpfabc.cpf import (CpfParams, max_flight_distance, nest_specific_distance, site_intensities,
                        suitability, visitation_field)
from cpfabc.landscape import AttributeMap


def _compare(attrs, theta):
    field = visitation_field(attrs, theta)
    nu, s, tau, _ = brute_visitation(attrs.floral, attrs.nesting, attrs.resolution, *theta.as_tuple())
    assert np.allclose(field.nu, nu, rtol=1e-12, atol=0)
    assert np.allclose(field.suitability, s, rtol=1e-12, atol=0)
    assert np.allclose(field.tau_nest, tau, rtol=1e-12, atol=0)
    return field


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_pruned_field_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    _compare(random_attrs(rng, max_side=12), random_theta(rng))


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_site_intensities_match_full_field(seed):
    rng = np.random.default_rng(seed)
    attrs = random_attrs(rng, max_side=14)
    theta = random_theta(rng)
    cells = rng.choice(attrs.floral.size, size=min(5, attrs.floral.size), replace=False)
    full = visitation_field(attrs, theta).nu.ravel()
    assert np.allclose(site_intensities(attrs, theta, cells), full[cells], rtol=1e-12, atol=0)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_mass_conservation(seed):
    rng = np.random.default_rng(seed)
    attrs = random_attrs(rng, max_side=15)
    theta = random_theta(rng)
    nu = visitation_field(attrs, theta).nu
    _, _, _, active = brute_visitation(attrs.floral, attrs.nesting, attrs.resolution, *theta.as_tuple())
    expected = attrs.nesting.ravel()[active].sum()
    assert abs(nu.sum() - expected) <= 1e-12 * max(expected, 1.0)
    assert np.all(nu >= 0)


def test_suitability_single_patch(rng):
    attrs = random_attrs(rng, max_side=10)
    theta = random_theta(rng)
    s = visitation_field(attrs, theta).suitability.ravel()
    for i in range(0, attrs.floral.size, 3):
        assert suitability(i, attrs, theta) == pytest.approx(s[i], rel=1e-13)
    with pytest.raises(IndexError):
        suitability(attrs.floral.size, attrs, theta)


def test_single_flower_single_nest():
    floral = np.array([[0.0, 0.5]])
    nesting = np.array([[1.0, 0.0]])
    theta = CpfParams(1000.0, 0.1, 500.0, 200.0)
    nu = visitation_field(AttributeMap(floral, nesting, 10.0), theta).nu
    # the only reachable flower receives the whole nest
    assert nu[0, 1] == pytest.approx(1.0, rel=1e-15)
    assert nu[0, 0] == 0.0


def test_no_flowers_no_visits():
    attrs = AttributeMap(np.zeros((4, 4)), np.ones((4, 4)), 30.0)
    assert np.all(visitation_field(attrs, CpfParams(800, 0.1, 300, 300)).nu == 0)


def test_flight_distances():
    theta = CpfParams(1000.0, 0.1, 300.0, 150.0)
    assert max_flight_distance(0.1, theta) == 0.0
    assert max_flight_distance(1.0, theta) == pytest.approx(900.0)
    with pytest.raises(AssertionError):
        max_flight_distance(0.05, theta)
    s = np.linspace(0, 5e6, 200)
    tau = nest_specific_distance(s, theta)
    assert np.all(np.diff(tau) < 0) and np.all(tau > 0) and np.all(tau < theta.tau0)
    assert nest_specific_distance(1e30, theta) >= 0.0


@pytest.mark.parametrize("bad", [dict(tau0=0), dict(f0=-1), dict(a=np.nan), dict(b=np.inf)])
def test_invalid_params(bad):
    kw = dict(tau0=100.0, f0=0.1, a=200.0, b=200.0) | bad
    with pytest.raises(ValueError):
        CpfParams(**kw)
