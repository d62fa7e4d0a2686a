import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cpfabc.landscape import AttributeMap

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def brute_visitation(floral, nesting, res, tau0, f0, a, b):
    """All-pairs visitation field, straight from the model definition."""
    floral = np.asarray(floral, dtype=float)
    h, w = floral.shape
    n = h * w
    r, c = np.divmod(np.arange(n), w)
    dr = np.abs(r[:, None] - r[None, :]).astype(float)
    dc = np.abs(c[:, None] - c[None, :]).astype(float)
    d = res * np.sqrt(dr * dr + dc * dc)
    f = floral.ravel()
    q = np.asarray(nesting, dtype=float).ravel()
    g = np.zeros(n)
    ok = f >= f0
    g[ok] = 1.0 - f0 / f[ok]
    delta = tau0 * g[None, :] - d
    s = np.where(delta > 0, delta, 0.0).sum(axis=1)
    tau = tau0 / (1.0 + np.exp((np.sqrt(s) - a) / b))
    dstar = tau[:, None] * g[None, :] - d
    pos = np.where((dstar > 0) & (g[None, :] > 0), dstar, 0.0)
    z = pos.sum(axis=1)
    share = np.divide(q, z, out=np.zeros(n), where=z > 0)
    nu = (share[:, None] * pos).sum(axis=0)
    return nu.reshape(h, w), s.reshape(h, w), tau.reshape(h, w), (q > 0) & (z > 0)


def random_attrs(rng, max_side=20, res=None):
    h, w = rng.integers(1, max_side + 1, size=2)
    floral = rng.random((h, w))
    floral[rng.random((h, w)) < 0.2] = 0.0
    nesting = np.where(rng.random((h, w)) < 0.3, rng.random((h, w)), 0.0)
    nesting[rng.random((h, w)) < 0.1] = 1.0
    res = float(rng.choice([10.0, 30.0, 50.0])) if res is None else res
    return AttributeMap(floral, nesting, res)


def random_theta(rng):
    from cpfabc.cpf import CpfParams

    return CpfParams(float(rng.uniform(30, 1500)), float(rng.uniform(0.01, 0.6)),
                     float(rng.uniform(100, 1000)), float(rng.uniform(100, 1000)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tiny_config(**over):
    """Small but complete run configuration for pipeline tests."""
    from cpfabc.config import RunConfig

    data = {
        "seed": 3,
        "landscape": {"synthetic": {"count": 2, "width": 24, "height": 24, "seed": 1}},
        "design": {"habitats": [1, 2, 4], "transects_per_habitat": 2, "years": [0, 1]},
        "table": {"M": 240, "chunk": 50},
        "simstudy": {"n_ref": 3},
        "abc": {"n_trees": 30, "gbm_stages": 30, "nn_max_iter": 60, "anlh_min_retained": 10},
        "predict": {"n_draws": 20},
    }
    for k, v in over.items():
        if isinstance(v, dict):
            data.setdefault(k, {}).update(v)
        else:
            data[k] = v
    return RunConfig.from_dict(data)


# acceptance lines, printed once at the end of the session
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
