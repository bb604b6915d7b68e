"""
Tests for the brute-force torus-search counter.
"""
import pytest

from config import DEFAULT_SETTINGS
from services.geometry import make_geometry
from services.ik_solver import count_ik
from services.oracle import BruteForceOracle, OracleConfig, brute_force_count, reach_bounds


def test_reach_bounds_of_shell():
    """Case B1 reaches the shell between d3 - d4 and d3 + d4."""
    low, high = reach_bounds(make_geometry(0, 2, 0, 0, 1))
    assert low == pytest.approx(1.0, abs=1e-6)
    assert high == pytest.approx(3.0, abs=1e-6)


def test_unreachable_target_counts_zero():
    geom = make_geometry(0, 2, 0, 0, 1)
    assert brute_force_count(geom, 5.0, 0.0) == 0
    assert brute_force_count(geom, 0.5, 0.0) == 0


def test_oracle_agrees_with_analytic_count():
    geom = make_geometry(0, 2, 0, 0, 1)
    assert brute_force_count(geom, 2.0, 0.0) == 4

    geom = make_geometry(1, 3, 2, 0, 4)
    oracle = BruteForceOracle(geom, OracleConfig.from_settings(DEFAULT_SETTINGS))
    for rho, z in ((7.0, 1.0), (4.0, -2.5), (2.5, 0.3), (9.5, 0.0)):
        assert oracle.count(rho, z) == count_ik(geom, rho, z)


def test_oracle_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(grid_n=64)
    with pytest.raises(ValueError):
        OracleConfig(dedupe_tol=0.0)
    with pytest.raises(ValueError):
        BruteForceOracle(make_geometry(0, 2, 0, 0, 1)).count(-1.0, 0.0)
