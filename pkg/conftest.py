"""
Shared fixtures: the Flask app for pytest-flask, and workspace analyses
computed once per session.
"""
import pytest

from app import create_app
from config import DEFAULT_SETTINGS, TestingConfig
from services.geometry import make_geometry
from services.topology import analyze_workspace

# (d2, d3, r2, r3, d4)
GEOMETRIES = {
    'fig3': (1, 3, 2, 0, 4),
    'A1': (0, 2, 1, 0, 1.5),
    'A2': (0, 2, 1.5, 0, 2.2),
    'A3': (0, 2, 1, 0, 3),
    'B1': (0, 2, 0, 0, 1),
    'B2': (0, 2, 0, 0, 3),
    'C': (0, 0, 1.5, 0, 2),
    'D1': (1, 1.4, 0, 0, 0.7),
    'D2': (1, 2, 0, 0, 1.5),
    'D3': (1, 2, 0, 0, 2.5),
    'D4': (1, 0.5, 0, 0, 2),
    'D5': (1, 0.6, 0, 0, 0.7),
    'D6': (1, 0.7, 0, 0, 0.5),
    'E': (1, 0, 0, 0, 1.5),
    'F1': (0, 2, 1, 1, 1.5),
    'F2': (0, 1, 1, 1, 2),
    'G': (0, 1, 0, 1, 3),
    'H': (0, 0, 3, 1, 1),
    'J': (1, 0, 0, 1, 2),
    'I1': (1, 2.5, 0, 0.5, 1.5),
    'I2': (1, 3, 0, 0.5, 0.7),
    # published figures for I3 and I4; the inequalities label them I4 and I3
    'I3_caption': (1, 0.5, 0, 0.5, 0.7),
    'I4_caption': (1, 0.3, 0, 0.5, 2),
}


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: full workspace analysis at default resolution')


@pytest.fixture
def app():
    app = create_app(TestingConfig)
    yield app


@pytest.fixture(scope='session')
def geometry():
    """Factory: geometry by name from GEOMETRIES."""
    def build(name):
        return make_geometry(*GEOMETRIES[name])
    return build


@pytest.fixture(scope='session')
def analysis(geometry):
    """Factory: default-resolution analysis by name, computed once per session."""
    cache = {}

    def build(name):
        if name not in cache:
            cache[name] = analyze_workspace(geometry(name), DEFAULT_SETTINGS)
        return cache[name]
    return build
