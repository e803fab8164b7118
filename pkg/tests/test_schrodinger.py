import numpy as np
import pytest

from vmsekit.errors import ConfigError
from vmsekit.grids import make_grid, spectral_derivative
from vmsekit.mass import MassModel, eval_mass
from vmsekit.schrodinger import (
    PacketSpec,
    SchrodingerRun,
    WaveField,
    cn_step,
    initial_wave,
    resolution_for,
    solve_vmse,
)

FREE = MassModel(kind="constant", value=1.0)


def free_packet_exact(packet, eps, t, x):
    """Dispersing Gaussian for the constant-coefficient equation."""
    z = 1.0 + 2j * eps * t * packet.A
    B = packet.A / z
    return (
        z**-0.5
        * np.exp(-B * (x - packet.x0 - packet.p0 * t) ** 2)
        * np.exp(1j * (packet.p0 * x - 0.5 * packet.p0**2 * t) / eps)
    )


class TestInitialWave:
    def test_formula_and_norm(self):
        grid = make_grid(2.0, 256, 1.0, 0.5)
        eps, pk = 2.0**-5, PacketSpec(A=2.0**7, x0=0.75, p0=1.0)
        w = initial_wave(grid, eps, pk)
        ref = np.exp(-pk.A * (grid.x - pk.x0) ** 2 + 1j * pk.p0 * grid.x / eps)
        assert np.allclose(w.u, ref, rtol=0, atol=1e-15)
        # Gaussian mass: integral of exp(-2A(x-x0)^2) = sqrt(pi/(2A))
        assert np.isclose(w.norm_sq(), np.sqrt(np.pi / (2 * pk.A)), rtol=1e-12)

    def test_initial_current_is_p0_times_density(self):
        grid = make_grid(2.0, 256, 1.0, 0.5)
        eps, pk = 2.0**-5, PacketSpec(A=2.0**7, x0=0.75, p0=1.0)
        tr = solve_vmse(
            SchrodingerRun(grid=grid, eps=eps, model=FREE, packet=pk,
                           output_times=(0.0,))
        )
        assert np.allclose(tr.J[0], pk.p0 * tr.rho[0], rtol=0, atol=1e-10)

    def test_validation(self):
        grid = make_grid(1.0, 64, 1.0, 0.5)
        with pytest.raises(ConfigError):
            PacketSpec(A=0.0)
        with pytest.raises(ConfigError):
            WaveField(grid=grid, eps=0.25, t=0.0, u=np.zeros(32, dtype=complex))
        with pytest.raises(ConfigError):
            WaveField(grid=grid, eps=-1.0, t=0.0, u=np.zeros(64, dtype=complex))


class TestResolutionRule:
    def test_packet_rule(self):
        g = resolution_for(2.0**-6, 1.25, 0.5, "packet")
        assert np.isclose(g.dx, 2.0**-8, rtol=1e-14)
        assert g.M == 320
        assert np.isclose(g.dt, 2.0 ** (-1.2 * 6 - 3), rtol=1e-14)

    def test_barrier_rule(self):
        g = resolution_for(2.0**-6, 2.0, 0.5, "barrier")
        assert np.isclose(g.dx, 2.0**-8, rtol=1e-14)
        assert np.isclose(g.dt, 2.0**-12, rtol=1e-14)

    def test_errors(self):
        with pytest.raises(ConfigError):
            resolution_for(2.0**-6, 1.25, 0.5, "spline")
        with pytest.raises(ConfigError):
            resolution_for(1.5, 1.25, 0.5)
        # L must be an even multiple of dx
        with pytest.raises(ConfigError):
            resolution_for(2.0**-4, 1.0 / 3.0, 0.5)


@pytest.fixture(scope="module")
def free_run():
    eps, pk = 2.0**-5, PacketSpec(A=2.0**7, x0=0.75, p0=1.0)
    grid = resolution_for(eps, 2.0, 0.25, "packet")
    tr = solve_vmse(
        SchrodingerRun(grid=grid, eps=eps, model=FREE, packet=pk,
                       snapshot_times=(0.25,))
    )
    return eps, pk, grid, tr


class TestFreePacket:
    def test_matches_analytic_dispersion(self, free_run):
        eps, pk, grid, tr = free_run
        u_ex = free_packet_exact(pk, eps, 0.25, grid.x)
        rel = np.linalg.norm(tr.waves[0.25] - u_ex) / np.linalg.norm(u_ex)
        assert rel <= 6e-3  # measured 2.80e-3, dominated by the O(dt^2) step

    def test_time_error_is_second_order(self, free_run):
        eps, pk, grid, _ = free_run
        u_ex = free_packet_exact(pk, eps, 0.25, grid.x)
        fine = make_grid(2.0, grid.M, 0.25, grid.dt / 4)
        tr4 = solve_vmse(
            SchrodingerRun(grid=fine, eps=eps, model=FREE, packet=pk,
                           snapshot_times=(0.25,))
        )
        rel4 = np.linalg.norm(tr4.waves[0.25] - u_ex) / np.linalg.norm(u_ex)
        assert rel4 <= 4e-4  # measured 1.75e-4
        # dt -> dt/4 should cut the error by about 16
        coarse = solve_vmse(
            SchrodingerRun(grid=grid, eps=eps, model=FREE, packet=pk,
                           snapshot_times=(0.25,))
        )
        rel1 = np.linalg.norm(coarse.waves[0.25] - u_ex) / np.linalg.norm(u_ex)
        assert rel1 / rel4 >= 10.0  # measured 15.97

    def test_center_of_mass_speed(self, free_run):
        eps, pk, grid, tr = free_run
        rho0 = np.abs(initial_wave(grid, eps, pk).u) ** 2
        rhoT = np.abs(tr.waves[0.25]) ** 2
        x_start = np.sum(grid.x * rho0) / np.sum(rho0)
        x_end = np.sum(grid.x * rhoT) / np.sum(rhoT)
        speed = (x_end - x_start) / 0.25
        assert abs(speed - pk.p0) <= 0.02 * pk.p0  # measured 0.99939


class TestVariableMass:
    def test_dt_halving_order(self, example1_model, example1_packet):
        eps, L, T = 2.0**-4, 1.25, 0.25
        base = resolution_for(eps, L, T, "packet")
        finals = []
        for k in (1, 2, 4):
            g = make_grid(L, base.M, T, base.dt / k)
            tr = solve_vmse(
                SchrodingerRun(grid=g, eps=eps, model=example1_model,
                               packet=example1_packet, snapshot_times=(T,))
            )
            finals.append(tr.waves[T])
        e1 = np.linalg.norm(finals[0] - finals[1])
        e2 = np.linalg.norm(finals[1] - finals[2])
        order = np.log2(e1 / e2)
        assert order >= 1.8  # measured 1.92

    def test_spatial_operator_self_adjoint(self, example1_model):
        grid = make_grid(1.25, 128, 1.0, 0.5)
        m = eval_mass(example1_model, 0.37, grid.x)
        rng = np.random.default_rng(0)
        for _ in range(20):
            u = rng.standard_normal(grid.M) + 1j * rng.standard_normal(grid.M)
            v = rng.standard_normal(grid.M) + 1j * rng.standard_normal(grid.M)
            Lu = spectral_derivative(m * spectral_derivative(u, grid), grid)
            Lv = spectral_derivative(m * spectral_derivative(v, grid), grid)
            lhs = np.sum(np.conj(Lu) * v) * grid.dx
            rhs = np.sum(np.conj(u) * Lv) * grid.dx
            scale = np.linalg.norm(Lu) * np.linalg.norm(v) * grid.dx
            assert abs(lhs - rhs) / scale <= 1e-10  # measured ~8e-17

    def test_unitarity(self, example1_model, example1_packet):
        eps = 2.0**-5
        grid = resolution_for(eps, 1.25, 0.5, "packet")
        tr = solve_vmse(
            SchrodingerRun(grid=grid, eps=eps, model=example1_model,
                           packet=example1_packet)
        )
        assert tr.norm_drift <= 1e-8  # measured 2.6e-15

    def test_zero_field_reduces_bitwise(self, example1_model, example1_packet):
        eps = 2.0**-5
        grid = resolution_for(eps, 1.25, 0.5, "packet")

        class ZeroField:
            def at_time(self, t):
                return np.zeros(grid.M)

        runs = []
        for field in (None, ZeroField()):
            tr = solve_vmse(
                SchrodingerRun(grid=grid, eps=eps, model=example1_model,
                               packet=example1_packet, snapshot_times=(0.5,)),
                field=field,
            )
            runs.append(tr)
        assert np.array_equal(runs[0].waves[0.5], runs[1].waves[0.5])
        assert np.array_equal(runs[0].rho, runs[1].rho)
        assert np.array_equal(runs[0].J, runs[1].J)


class TestStepValidation:
    def test_cn_step_needs_positive_dt(self):
        grid = make_grid(1.0, 64, 1.0, 0.5)
        w = initial_wave(grid, 0.25, PacketSpec(A=16.0, x0=0.5, p0=0.0))
        with pytest.raises(ConfigError):
            cn_step(w, FREE, dt=0.0)
        with pytest.raises(ConfigError):
            cn_step(w, FREE)

    def test_triple_needs_three_steps(self):
        grid = make_grid(1.0, 64, 1.0, 0.5)
        run = SchrodingerRun(grid=grid, eps=0.25, model=FREE,
                             packet=PacketSpec(A=16.0, x0=0.5, p0=0.0),
                             triple_time=0.5)
        with pytest.raises(ConfigError):
            solve_vmse(run)
