"""Shared fixtures.

Heavy study runs honor the CI-smoke config flag: exporting VMSEKIT_SMOKE=1
scales the random-ensemble acceptance run down (fewer samples, fewer
scales) per its documented reduced mode; slope assertions are then skipped
because the sample count falls below the statistical floor.
"""

import os

import numpy as np
import pytest

from vmsekit.grids import make_grid, make_velocity_grid
from vmsekit.klfield import CorrelationSpec
from vmsekit.mass import MassModel
from vmsekit.rte import RteRun, solve_rte
from vmsekit.schrodinger import PacketSpec


def smoke_mode() -> bool:
    return os.environ.get("VMSEKIT_SMOKE", "") not in ("", "0")


@pytest.fixture(scope="session")
def example1_model():
    return MassModel(kind="oscillatory_product")


@pytest.fixture(scope="session")
def diode_model():
    return MassModel(kind="diode_bumps", potential_kind="diode_bumps")


@pytest.fixture(scope="session")
def example1_packet():
    return PacketSpec(A=2.0**7, x0=0.25, p0=1.0)


@pytest.fixture(scope="session")
def random_packet():
    return PacketSpec(A=2.0**8, x0=0.3, p0=1.5)


@pytest.fixture(scope="session")
def random_corr():
    return CorrelationSpec(D=1.5, a=100.0, b=100.0)


@pytest.fixture(scope="session")
def random_model():
    return MassModel(kind="constant", value=1.0, gamma=0.5)


@pytest.fixture(scope="session")
def rte_reference_random(random_model, random_packet, random_corr):
    """Kinetic reference for the random-mass ensemble studies.

    The scattering kernel is a Lorentzian of width 1/b = 0.01 in momentum
    transfer, so the velocity grid uses dk ~= 2^-10 to resolve it; the
    reference is scale-free and shared by every ensemble comparison. In
    smoke mode a coarser grid is used (the smoke runs assert machinery,
    not convergence rates).
    """
    L, T = 1.625, 0.4
    if smoke_mode():
        grid = make_grid(L, 208, T, T / 64.0)
        vgrid = make_velocity_grid(0.9, 2.1, 616)
    else:
        grid = make_grid(L, 416, T, T / 64.0)
        vgrid = make_velocity_grid(0.9, 2.1, 1231)
    trace = solve_rte(RteRun(
        grid=grid, vgrid=vgrid, model=random_model, packet=random_packet,
        corr=random_corr, output_times=(T,),
    ))
    assert trace.mass_drift < 1e-10
    return {"x": grid.x, "rho": trace.rho[-1], "J": trace.J[-1],
            "L": L, "T": T}


def l2_relative(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
