"""
Tests for the property suites behind the validate command.
"""
from types import SimpleNamespace

import pytest

from config import DEFAULT_SETTINGS, AnalysisSettings
from services import validator as validator_module
from services.geometry import make_geometry
from services.topology import analyze_workspace
from services.validator import WorkspaceValidator

QUICK = AnalysisSettings(grid_n=360, raster_n=400, oracle_grid_n=256)


@pytest.fixture(scope='module')
def validator_a1():
    return WorkspaceValidator(make_geometry(0, 2, 1, 0, 1.5), QUICK, samples=20, seed=0)


@pytest.mark.slow
def test_determinant_suite(validator_a1):
    result = validator_a1.determinant_proportionality()
    assert result.passed
    assert result.details['ratio'] == pytest.approx(1.0, rel=1e-5)


@pytest.mark.slow
def test_region_adjacency_suite(validator_a1):
    result = validator_a1.region_adjacency()
    assert result.passed
    assert result.details['raster_conserved']


@pytest.mark.slow
def test_mirror_suite(validator_a1):
    assert validator_a1.mirror_symmetry().passed


@pytest.mark.slow
def test_oracle_suite(validator_a1):
    result = validator_a1.oracle_agreement()
    assert result.details['probes'] > 0
    assert result.passed, result.failing_probe


@pytest.mark.slow
def test_type_specific_suites_are_selected():
    report = WorkspaceValidator(make_geometry(3, 2, 0, 0, 1), QUICK, samples=5, seed=1).run()
    names = [r.name for r in report.results]
    assert 'binary' in names
    assert 'well_connected' not in names
    assert report.type_label == 'D6'
    assert report.to_dict()['seed'] == 1


def test_finite_difference_step_is_an_angle(monkeypatch):
    # a large arm: scaling the joint-angle step by L would wreck the difference quotient
    stub = SimpleNamespace(singular=SimpleNamespace(torus_curves=[]))
    monkeypatch.setattr('services.validator.analyze_workspace', lambda geom, settings: stub)
    steps = []
    original = validator_module.numeric_jacobian_det

    def recording(geom, q, step):
        steps.append(step)
        return original(geom, q, step)

    monkeypatch.setattr('services.validator.numeric_jacobian_det', recording)
    geom = make_geometry(0, 2, 1, 0, 1.5).scaled(100.0)
    result = WorkspaceValidator(geom, QUICK, samples=5, seed=0).determinant_proportionality()
    assert steps and set(steps) == {QUICK.fd_step}
    assert result.passed, result.details
    assert result.details['ratio'] == pytest.approx(1.0, rel=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize('params', [(1, 3, 2, 0, 4), (1, 3, 0, 0.5, 0.7), (0, 2, 1, 1, 1.5)])
def test_oracle_agrees_over_hundreds_of_probes(params):
    result = WorkspaceValidator(make_geometry(*params), QUICK, samples=300, seed=7).oracle_agreement()
    assert result.details['probes'] == 300
    assert result.passed, result.failing_probe


@pytest.mark.slow
@pytest.mark.parametrize('params', [(1, 3, 2, 0, 4), (0, 2, 1, 0, 3)])
def test_full_signature_is_scale_invariant(params):
    geom = make_geometry(*params)
    base = analyze_workspace(geom, QUICK).topology.signature()
    for factor in (0.1, 10.0):
        assert analyze_workspace(geom.scaled(factor), QUICK).topology.signature() == base
    assert WorkspaceValidator(geom, QUICK, samples=5).scale_invariance().passed


@pytest.mark.slow
def test_near_tangent_example_is_mirror_symmetric():
    validator = WorkspaceValidator(make_geometry(1, 0.5, 0, 0.5, 0.7), DEFAULT_SETTINGS, samples=5)
    result = validator.mirror_symmetry()
    assert result.passed, result.failing_probe


@pytest.mark.slow
@pytest.mark.parametrize('params', [(1, 2, 0, 0, 1.5), (1, 3, 0, 0.5, 0.7)])
def test_axis_pinches_pass_region_adjacency(params):
    result = WorkspaceValidator(make_geometry(*params), DEFAULT_SETTINGS, samples=5).region_adjacency()
    assert result.passed, result.failing_probe
    assert result.details['pinch_contacts'] > 0
