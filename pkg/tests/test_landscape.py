import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpfabc.errors import ConfigError, FormatError
from cpfabc.landscape import (AttributeMap, CategoryProfile, LandscapeRaster, default_profiles,
                              generate_attribute_maps, load_grid, load_raster, patch_centroids,
                              patch_index, save_grid, save_raster, synthetic_raster)


def test_raster_validation():
    with pytest.raises(ValueError):
        LandscapeRaster(np.zeros(4), 10.0)
    with pytest.raises(ValueError):
        LandscapeRaster(np.array([[0.5, 1.0]]), 10.0)
    with pytest.raises(ValueError):
        LandscapeRaster(np.zeros((2, 2), int), 0.0)
    r = LandscapeRaster(np.array([[1.0, 2.0]]), 5)
    assert r.landuse.dtype == np.int64 and r.width == 2 and r.height == 1


def test_profile_validation():
    with pytest.raises(ValueError):
        CategoryProfile(1, (("beta", 0.0, 1.0),))
    with pytest.raises(ValueError):
        CategoryProfile(1, (("point", 1.5),))
    with pytest.raises(ValueError):
        CategoryProfile(1, (("gamma", 1.0),))
    with pytest.raises(ValueError):
        CategoryProfile(1, (("point", 0.5),), nesting=2.0)
    p = CategoryProfile(1, (("point", 0.2), ("point", 0.4)))
    assert p.law(5) == ("point", 0.4)


def test_attribute_maps_follow_profiles():
    raster = synthetic_raster(30, 20, 10.0, seed=4)
    profiles = default_profiles(3)
    m = generate_attribute_maps(raster, profiles, period=1, year=0, seed=9)
    assert m.shape == (20, 30)
    urban = raster.landuse == 0
    assert np.all(m.floral[urban] == 0.0)
    assert set(np.unique(m.nesting)) <= {0.0, 1.0}
    nests = raster.landuse[m.nesting > 0]
    assert set(np.unique(nests)) <= {2, 3}
    # arable flowers in period 2 (index 1) follow Beta(8, 2)
    arable = m.floral[raster.landuse == 1]
    if arable.size > 50:
        assert abs(arable.mean() - 0.8) < 0.1


def test_attribute_maps_missing_profile():
    raster = LandscapeRaster(np.array([[0, 7]]), 10.0)
    with pytest.raises(ConfigError):
        generate_attribute_maps(raster, default_profiles(), 0, 0, 1)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_attribute_maps_deterministic(seed, period):
    raster = synthetic_raster(8, 6, 10.0, seed=1)
    a = generate_attribute_maps(raster, default_profiles(), period, 0, seed)
    b = generate_attribute_maps(raster, default_profiles(), period, 0, seed)
    assert np.array_equal(a.floral, b.floral) and np.array_equal(a.nesting, b.nesting)
    assert np.all((a.floral >= 0) & (a.floral <= 1))


def test_attribute_map_rejects_out_of_range():
    with pytest.raises(ValueError):
        AttributeMap(np.full((2, 2), 1.2), np.zeros((2, 2)), 10.0)
    with pytest.raises(ValueError):
        AttributeMap(np.zeros((2, 2)), np.zeros((2, 3)), 10.0)


def test_patches_and_centroids():
    raster = synthetic_raster(5, 3, 20.0, seed=2)
    patches = patch_index(raster)
    cen = patch_centroids(raster)
    assert len(patches) == 15
    assert all(p.id == k for k, p in enumerate(patches))
    assert np.allclose(cen, [[p.x, p.y] for p in patches])
    assert patches[7].row == 1 and patches[7].col == 2 and patches[7].x == 50.0


def test_raster_roundtrip(tmp_path):
    raster = synthetic_raster(7, 4, 25.0, seed=3, id="r1")
    path = tmp_path / "r1.asc"
    save_raster(raster, path)
    back = load_raster(path)
    assert back.id == "r1" and back.resolution == 25.0
    assert np.array_equal(back.landuse, raster.landuse)


def test_float_grid_roundtrip_is_exact(tmp_path, rng):
    grid = rng.random((3, 4)) * 1e3
    save_grid(tmp_path / "g.asc", grid, 30.0)
    back, res = load_grid(tmp_path / "g.asc")
    assert res == 30.0 and np.array_equal(back, grid)


@pytest.mark.parametrize("text", [
    "width 2\nheight 1\n1 2\n",
    "width 2\nheight 2\nresolution 10\n1 2\n",
    "width 2\nheight 1\nresolution 10\n1 x\n",
    "width 2\nheight 1\nresolution -1\n1 2\n",
])
def test_malformed_rasters(tmp_path, text):
    p = tmp_path / "bad.asc"
    p.write_text(text)
    with pytest.raises(FormatError):
        load_raster(p)


def test_synthetic_raster_deterministic_and_weighted():
    a = synthetic_raster(40, 40, 30.0, seed=8, category_weights={1: 1.0, 2: 0.0})
    b = synthetic_raster(40, 40, 30.0, seed=8, category_weights={1: 1.0, 2: 0.0})
    assert np.array_equal(a.landuse, b.landuse)
    assert set(np.unique(a.landuse)) == {1}
    with pytest.raises(ConfigError):
        synthetic_raster(4, 4, 1.0, category_weights={1: -1.0})
