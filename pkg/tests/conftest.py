"""
Fixtures compartidas: mallas generadas pequeñas, archivos de malla y discretizaciones
"""
from pathlib import Path

import pytest

from pmchwt.bem_operators import MaterialParams
from pmchwt.mesh_generators import icosphere, octahedron, torus
from pmchwt.mesh_topology import load_mesh
from pmchwt.pmchwt_system import prepare_discretization

FIXTURES = Path(__file__).parent / 'fixtures'


# Registrar marcadores
def pytest_configure(config):
    config.addinivalue_line(
        "markers", "integration: reproduce un experimento completo sobre una malla gruesa"
    )
    config.addinivalue_line(
        "markers", "slow: prueba que ensambla varios sistemas densos"
    )


@pytest.fixture(scope='session')
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope='session')
def octa_mesh():
    """Octaedro regular de radio 1"""
    return octahedron()


@pytest.fixture(scope='session')
def sphere1():
    """Icosfera de nivel 1 (80 triángulos, 120 aristas)"""
    return icosphere(level=1)


@pytest.fixture(scope='session')
def sphere2():
    """Icosfera de nivel 2 (320 triángulos, 480 aristas)"""
    return icosphere(level=2)


@pytest.fixture(scope='session')
def coarse_torus():
    """Toro de género 1 con 8×4 celdas"""
    return torus(major=1.0, minor=0.3, n_major=8, n_minor=4)


@pytest.fixture(scope='session')
def msh_mesh():
    return load_mesh(FIXTURES / 'octahedron.msh')


@pytest.fixture(scope='session')
def off_mesh():
    return load_mesh(FIXTURES / 'tetra_flipped.off')


@pytest.fixture(scope='session')
def octa_disc(octa_mesh):
    return prepare_discretization(octa_mesh)


@pytest.fixture(scope='session')
def sphere_disc(sphere1):
    return prepare_discretization(sphere1)


@pytest.fixture(scope='session')
def torus_disc(coarse_torus):
    return prepare_discretization(coarse_torus)


@pytest.fixture
def dielectric():
    return MaterialParams(eps_r_prime=4.0, sigma=0.0)


@pytest.fixture
def conductor():
    return MaterialParams(eps_r_prime=1.0, sigma=1.0)
