import numpy as np
import pytest

from momscat.mesh import generate_canonical, generate_sphere
from momscat.operators import PlaneWave, assemble, excite_plane_wave
from momscat.rwg import build_rwg_space


@pytest.fixture(scope="session")
def sphere_n2():
    return generate_sphere(1.0, 0.3)


@pytest.fixture(scope="session")
def sphere_n3():
    return generate_sphere(1.0, 0.2)


@pytest.fixture(scope="session")
def cube_coarse():
    return generate_canonical("cube", {"side": 1.0}, 0.4)


@pytest.fixture(scope="session")
def sphere_n3_system():
    """Assembled sphere (N=270) at 200 MHz with x-polarized -z plane wave."""
    mesh = generate_sphere(1.0, 0.2)
    space = build_rwg_space(mesh)
    ops = assemble(space, 200e6)
    wave = PlaneWave(k_hat=[0, 0, -1], e0=[1, 0, 0], frequency=200e6)
    exc = excite_plane_wave(space, wave)
    return mesh, space, ops, exc, wave


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)
