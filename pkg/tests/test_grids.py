import numpy as np
import pytest

from vmsekit.errors import ConfigError
from vmsekit.grids import (
    GridSpec,
    make_grid,
    make_velocity_grid,
    spectral_derivative,
)


def test_make_grid_basic():
    g = make_grid(1.25, 320, 0.5, 2.0**-8)
    assert g.M == 320
    assert g.x[0] == 0.0
    assert np.isclose(g.dx, 1.25 / 320)
    assert g.x[-1] < g.L  # half-open periodic interval


def test_make_grid_validation():
    with pytest.raises(ConfigError):
        make_grid(1.0, 7, 0.5, 0.01)  # odd node count
    with pytest.raises(ConfigError):
        make_grid(-1.0, 8, 0.5, 0.01)
    with pytest.raises(ConfigError):
        make_grid(1.0, 8, 0.5, -0.01)


def test_velocity_grid_trapezoid_weights():
    vg = make_velocity_grid(0.0, 2.0, 9)
    assert np.isclose(vg.dk, 0.25)
    w = vg.weights
    assert np.isclose(w[0], vg.dk / 2)
    assert np.isclose(w[-1], vg.dk / 2)
    assert np.allclose(w[1:-1], vg.dk)
    # integrates a linear function exactly
    assert np.isclose(np.sum(w * vg.k), 2.0)


def test_velocity_grid_validation():
    with pytest.raises(ConfigError):
        make_velocity_grid(1.0, 1.0, 16)
    with pytest.raises(ConfigError):
        make_velocity_grid(0.0, 1.0, 4)


def test_spectral_derivative_exact_on_harmonics():
    g = make_grid(2.0, 64, 1.0, 0.1)
    u = np.sin(3 * np.pi * g.x)  # harmonic of the box
    du = spectral_derivative(u, g)
    assert np.allclose(du, 3 * np.pi * np.cos(3 * np.pi * g.x), atol=1e-10)
    d2u = spectral_derivative(u, g, order=2)
    assert np.allclose(d2u, -(3 * np.pi) ** 2 * u, atol=1e-9)


def test_spectral_derivative_axis_and_complex():
    g = make_grid(1.0, 32, 1.0, 0.1)
    u = np.exp(2j * np.pi * g.x)
    du = spectral_derivative(u, g)
    assert np.allclose(du, 2j * np.pi * u, atol=1e-10)
    U = np.stack([u, 2 * u])
    dU = spectral_derivative(U, g, axis=1)
    assert np.allclose(dU[1], 2 * du, atol=1e-10)


def test_spectral_derivative_odd_order_zeroes_nyquist():
    g = make_grid(1.0, 16, 1.0, 0.1)
    u = np.cos(np.pi * 16 * g.x)  # pure Nyquist mode
    du = spectral_derivative(u, g, order=1)
    assert np.allclose(du, 0.0, atol=1e-12)
