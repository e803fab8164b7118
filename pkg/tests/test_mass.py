import numpy as np
import pytest

from vmsekit.errors import ConfigError, EllipticityError
from vmsekit.mass import (
    ELLIPTICITY_FLOOR,
    MassModel,
    compose_mass,
    eval_mass,
    eval_mass_gradient,
    eval_potential,
    eval_potential_gradient,
)


def test_oscillatory_product_formula():
    model = MassModel(kind="oscillatory_product")
    rng = np.random.default_rng(7)
    t = rng.uniform(0, 1, 50)
    x = rng.uniform(0, 1.25, 50)
    want = (1 + 0.2 * np.sin(2 * np.pi * x)) * (1 + 0.2 * np.cos(2 * np.pi * t))
    got = np.array([eval_mass(model, ti, xi) for ti, xi in zip(t, x)]).ravel()
    assert np.allclose(got, want, rtol=1e-14)


def test_diode_mass_and_potential_shape():
    model = MassModel(kind="diode_bumps", potential_kind="diode_bumps")
    x = np.array([0.3, 0.625, 1.125, 1.6])
    m = eval_mass(model, 0.0, x)
    v = eval_potential(model, 0.0, x)
    # outside the wells: m = 1, V = 0; at a well center: m = 1 - depth, V = height
    assert np.allclose(m[[0, 3]], 1.0)
    assert np.allclose(v[[0, 3]], 0.0)
    assert np.allclose(m[[1, 2]], 0.5, atol=1e-12)
    assert np.allclose(v[[1, 2]], 1.0, atol=1e-12)
    # smooth joins: values approach the background at the window edges
    edge = eval_mass(model, 0.0, np.array([0.5 + 1e-9, 0.75 - 1e-9]))
    assert np.allclose(edge, 1.0, atol=1e-6)


def test_mass_gradient_matches_finite_differences():
    h = 1e-5
    rng = np.random.default_rng(11)
    for model in (
        MassModel(kind="oscillatory_product"),
        MassModel(kind="diode_bumps", potential_kind="diode_bumps"),
    ):
        t = rng.uniform(0, 1, 100)
        x = rng.uniform(0.05, 1.45, 100)
        grad = np.array([eval_mass_gradient(model, ti, xi)
                         for ti, xi in zip(t, x)]).ravel()
        fd = np.array([
            (eval_mass(model, ti, xi + h) - eval_mass(model, ti, xi - h)) / (2 * h)
            for ti, xi in zip(t, x)
        ]).ravel()
        scale = np.maximum(np.abs(grad), 1.0)
        assert np.max(np.abs(grad - fd) / scale) <= 1e-5


def test_potential_gradient_matches_finite_differences():
    model = MassModel(kind="diode_bumps", potential_kind="diode_bumps")
    h = 1e-5
    x = np.linspace(0.51, 0.74, 40)
    grad = eval_potential_gradient(model, 0.0, x)
    fd = (eval_potential(model, 0.0, x + h) - eval_potential(model, 0.0, x - h)) / (2 * h)
    scale = np.maximum(np.abs(grad), 1.0)
    assert np.max(np.abs(grad - fd) / scale) <= 1e-5


def test_x_shift_translates_the_window():
    model = MassModel(kind="oscillatory_product")
    shifted = MassModel(kind="oscillatory_product", x_shift=-0.5)
    x = np.linspace(0, 1, 17)
    assert np.allclose(eval_mass(shifted, 0.2, x), eval_mass(model, 0.2, x - 0.5))


def test_validation_errors():
    with pytest.raises(ConfigError):
        MassModel(kind="nope")
    with pytest.raises(EllipticityError):
        MassModel(kind="oscillatory_product", amp_x=1.0)
    with pytest.raises(EllipticityError):
        MassModel(kind="diode_bumps", depth=1.0)
    with pytest.raises(EllipticityError):
        MassModel(kind="constant", value=0.0)
    with pytest.raises(ConfigError):
        MassModel(gamma=0.0)
    with pytest.raises(ConfigError):
        MassModel(kind="diode_bumps", windows=((0.5, 0.75), (0.6, 0.9)))


def test_compose_mass_scaling_and_clamp():
    model = MassModel(kind="constant", value=1.0, gamma=0.5)
    x = np.linspace(0, 1, 5)
    field = np.full_like(x, 2.0)
    eps = 0.25
    m = compose_mass(model, eps, field, 0.0, x)
    assert np.allclose(m, 1.0 + 0.5 * 2.0)  # eps^0.5 = 0.5
    # zero field reduces bit-identically to the background
    m0 = eval_mass(model, 0.0, x)
    assert np.array_equal(compose_mass(model, eps, np.zeros_like(x), 0.0, x), m0)
    # a perturbation driving m negative raises, or clamps when asked
    bad = np.full_like(x, -10.0)
    with pytest.raises(EllipticityError):
        compose_mass(model, eps, bad, 0.0, x)
    clamped, count = compose_mass(model, eps, bad, 0.0, x, clamp=True)
    assert count == x.size
    assert np.all(clamped >= ELLIPTICITY_FLOOR)
