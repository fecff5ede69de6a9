import numpy as np
import pytest

from oscillab.fluxes import CATALOG, FluxModel, builtin_flux, validate_flux

TWO_PI = 2 * np.pi


def test_catalog_names():
    for name in CATALOG:
        m = builtin_flux(name)
        assert m.name == name
    with pytest.raises(ValueError):
        builtin_flux("nope")


def test_homogeneous_burgers_values():
    m = builtin_flux("homogeneous_burgers")
    y = (np.array(0.3),)
    assert float(m.A[0](y, np.array(2.0))) == 2.0       # A = xi^2/2 at xi=2
    assert float(m.a[0](y, np.array(2.0))) == 2.0       # a1 = xi
    assert float(m.a[1](y, np.array(2.0))) == 0.0       # a2 = -div_y A = 0


def test_shear_divergence_free_probes():
    m = builtin_flux("shear")
    rng = np.random.default_rng(0)
    y = (rng.uniform(0, 1, 1000), rng.uniform(0, 1, 1000))
    xi = rng.uniform(-1, 1, 1000)
    assert np.max(np.abs(m.a[2](y, xi))) <= 1e-10


def test_hetero_coefficient_value():
    # a2 = -b'(y): for b = cos(2 pi y), -b'(1/4) = 2 pi  [analytic oracle,
    # cross-checked against centered differences below]
    m = builtin_flux("hetero_1d", amplitude=1.0)
    got = float(m.a[1]((np.array(0.25),), np.array(1.0)))
    assert abs(got - TWO_PI) < 1e-12
    h = 1e-5
    b = m.params["b"]
    fd = -(b(0.25 + h) - b(0.25 - h)) / (2 * h)
    assert abs(got - fd) < 1e-6


def test_periodicity_all_catalog():
    rng = np.random.default_rng(1)
    for name in CATALOG:
        m = builtin_flux(name)
        y = tuple(rng.uniform(0, 1, 64) for _ in range(m.dim))
        xi = rng.uniform(-1, 1, 64)
        for i in range(m.dim):
            for k in range(m.dim):
                shifted = tuple(c + (1.0 if j == k else 0.0) for j, c in enumerate(y))
                gap = np.max(np.abs(m.A[i](shifted, xi) - m.A[i](y, xi)))
                assert gap <= 1e-12, (name, i, k, gap)


def test_validate_flux_passes_catalog():
    for name in CATALOG:
        rep = validate_flux(builtin_flux(name), probes=128, h=1e-4)
        assert rep.passed, f"{name}: {rep}"


def test_validate_fd_order():
    # centered-difference check of a_i vs A_i converges at order >= 1.9
    m = builtin_flux("hetero_1d")
    v1 = validate_flux(m, probes=64, h=1e-3).violations["divergence"]
    v2 = validate_flux(m, probes=64, h=5e-4).violations["divergence"]
    order = np.log2(v1 / v2) / np.log2(2.0)
    assert order >= 1.9


def test_corrupted_flux_detected():
    m = builtin_flux("homogeneous_burgers")
    bad = FluxModel(
        name="corrupt", dim=1, A=m.A,
        a=(lambda y, xi: np.asarray(xi) + 0.05, m.a[1]),  # a1 mismatched with dA/dxi
        eo_plus=m.eo_plus, eo_minus=m.eo_minus,
        divergence_free=True, separate=None,
    )
    rep = validate_flux(bad, probes=64, h=1e-4)
    assert not rep.passed
    assert rep.violations["a_consistency"] > 1e-2


def test_validation_probes_reproducible():
    r1 = validate_flux(builtin_flux("shear"), probes=64, h=1e-4)
    r2 = validate_flux(builtin_flux("shear"), probes=64, h=1e-4)
    assert r1.violations == r2.violations


def test_speed_bound_shear():
    m = builtin_flux("shear")
    assert abs(m.speed_bound(1.0) - 1.5) < 1e-2


def test_divergence_free_tag_thousand_probes():
    rng = np.random.default_rng(5)
    for name in ("shear", "hamiltonian", "separate_burgers", "homogeneous_burgers"):
        m = builtin_flux(name)
        y = tuple(rng.uniform(0, 1, 1000) for _ in range(m.dim))
        xi = rng.uniform(-1, 1, 1000)
        assert m.divergence_free
        assert np.max(np.abs(m.a[m.dim](y, xi))) <= 1e-10, name
