"""
Tests for singular-curve tracing and cusp/node/isolated point detection.
"""
import math

import numpy as np
import pytest

from config import DEFAULT_SETTINGS
from services.geometry import CrossSectionPoint, jacobian_det, make_geometry
from services.ik_solver import reduced_coefficients
from services.singularity import (
    CUSP,
    NODE,
    TRANSITION_DEGENERATE,
    CriticalPoint,
    NodeCandidate,
    analyze_singularities,
    certify_critical_point,
    cluster_node_candidates,
    detect_cusps,
    grid_angles,
    joint_space_singular_curves,
    resolve_crossing,
    reversal_vertices,
    workspace_singular_image,
)


def test_grid_offsets_by_half_pitch():
    theta = grid_angles(8)
    assert theta[0] == pytest.approx(-math.pi + math.pi / 8)
    assert len(theta) == 8


def test_grid_too_coarse():
    with pytest.raises(ValueError):
        joint_space_singular_curves(make_geometry(1, 3, 2, 0, 4), grid_n=32)


def test_traced_vertices_lie_on_zero_set():
    geom = make_geometry(1, 3, 2, 0, 4)
    curves = joint_space_singular_curves(geom, grid_n=360)
    assert len(curves) == 4
    unit = geom.normalized()
    for curve in curves:
        assert curve.closed
        values = jacobian_det(unit, curve.vertices[:, 0], curve.vertices[:, 1])
        assert np.max(np.abs(values)) < 1e-8


def test_first_factor_lines_collapse_to_points():
    geom = make_geometry(1, 3, 2, 0, 4)
    planar = workspace_singular_image(geom, joint_space_singular_curves(geom, grid_n=360))
    collapsed = [c for c in planar if c.degenerate_to_point]
    assert len(collapsed) == 2
    assert all(len(c.vertices) == len(c.preimage.vertices) for c in planar)
    assert all(np.all(c.vertices[:, 0] >= 0) for c in planar)


@pytest.mark.slow
def test_generic_r3zero_example_cusps_and_nodes(analysis):
    """The r3 = 0 example arm has two cusps and three nodes."""
    result = analysis('fig3')
    singular = result.singular
    assert len(singular.cusps) == 2
    assert len(singular.nodes) == 3
    assert singular.max_det_residual(result.geometry) < 1e-8
    for point in singular.cusps + singular.nodes:
        assert max(abs(r) for r in point.residuals) < DEFAULT_SETTINGS.cert_eps


@pytest.mark.slow
def test_cusps_come_in_mirror_pairs(analysis):
    cusps = analysis('fig3').singular.cusps
    a, b = sorted(cusps, key=lambda p: p.location.z)
    assert a.location.rho == pytest.approx(b.location.rho, abs=1e-6)
    assert a.location.z == pytest.approx(-b.location.z, abs=1e-6)


@pytest.mark.slow
def test_certificate_recomputes_stored_residuals(analysis):
    result = analysis('fig3')
    for point in result.singular.cusps:
        assert point.kind == CUSP
        residuals = certify_critical_point(result.geometry, point)
        assert max(abs(r) for r in residuals) < DEFAULT_SETTINGS.cert_eps
    for point in result.singular.nodes:
        assert point.kind == NODE
        assert len(point.preimages) == 2


@pytest.mark.parametrize('name', ['A1', 'B1', 'C', 'D1', 'E', 'F1', 'G', 'H', 'J', 'I1'])
def test_zero_parameter_families_have_no_cusps(name, geometry, monkeypatch):
    """Quadratic inverse problems cannot have triple roots; every fold candidate is rejected."""
    visited = []

    def counting(curve, L):
        indices = reversal_vertices(curve, L)
        visited.append(len(indices))
        return indices

    monkeypatch.setattr('services.singularity.reversal_vertices', counting)
    assert detect_cusps(geometry(name), settings=DEFAULT_SETTINGS.with_overrides(grid_n=360)) == []
    assert visited


def test_reduced_equation_root_is_never_triple():
    geom = make_geometry(0, 2, 1, 0, 1.5)
    unit = geom.normalized()
    theta3 = 0.3
    A, B, _ = reduced_coefficients(unit, 0.0, 0.0)
    # choose rho so that theta3 solves A s3 + B c3 + C = 0
    radius2 = unit.d3 ** 2 + unit.d4 ** 2 + unit.r2 ** 2 + unit.r3 ** 2 + A * math.sin(theta3) + B * math.cos(theta3)
    point = CriticalPoint(CUSP, CrossSectionPoint(math.sqrt(radius2) * geom.L, 0.0), [(0.0, theta3)])
    residuals = certify_critical_point(geom, point)
    assert len(residuals) == 3
    assert residuals[0] == pytest.approx(0.0, abs=1e-12)
    assert max(abs(r) for r in residuals) > DEFAULT_SETTINGS.cert_eps


@pytest.mark.slow
@pytest.mark.parametrize('name, nodes', [('A1', 0), ('A2', 2), ('A3', 4)])
def test_case_a_off_axis_nodes(name, nodes, analysis):
    singular = analysis(name).singular
    assert sum(1 for n in singular.nodes if not n.on_axis) == nodes
    assert singular.cusps == []


@pytest.mark.slow
def test_case_b2_has_one_node(analysis):
    assert analysis('B2').topology.n_nodes_offaxis + analysis('B2').topology.n_nodes_onaxis == 1


def test_analysis_at_coarse_grid_reports_grid():
    geom = make_geometry(0, 2, 1, 0, 3)
    settings = DEFAULT_SETTINGS.with_overrides(grid_n=360)
    singular = analyze_singularities(geom, settings)
    assert singular.grid_n in (360, 720)
    assert all(p.kind == NODE for p in singular.nodes)


def test_candidates_on_the_same_joint_points_form_one_crossing():
    first = NodeCandidate((0.5, 0.1), (0.1, 0.2), (1.0, -0.5), 0.3)
    # same crossing found from the other curve, 7e-4 away in the image
    second = NodeCandidate((0.5007, 0.1), (1.0, -0.5), (0.1001, 0.2), 0.3)
    third = NodeCandidate((0.5012, 0.1), (1.0002, -0.5), (0.1003, 0.2), 0.3)
    mirror = NodeCandidate((0.5, -0.1), (-0.1, -0.2), (-1.0, 0.5), 0.3)
    clusters = cluster_node_candidates([first, mirror, second, third], [], tol=0.05)
    assert sorted(len(c) for c in clusters) == [1, 3]
    assert cluster_node_candidates([], [], tol=0.05) == []


def test_image_neighbours_on_other_joint_points_stay_apart():
    a = NodeCandidate((0.5, 0.0), (0.1, 0.2), (1.0, -0.5), 0.3)
    b = NodeCandidate((0.5001, 0.0), (2.0, 1.2), (-2.5, 0.4), 0.3)
    assert len(cluster_node_candidates([a, b], [], tol=0.05)) == 2


def test_uncertified_near_tangent_crossing_is_a_transition_point(monkeypatch):
    geom = make_geometry(1, 0.5, 0, 0.5, 0.7)
    monkeypatch.setattr('services.singularity.certify_critical_point', lambda *args, **kwargs: (1e-3, 1e-3))
    tangent = [NodeCandidate((0.4, 0.2), (0.1, 0.2), (1.0, -0.5), 1e-5),
               NodeCandidate((0.4005, 0.2), (0.1, 0.2), (1.0, -0.5), 0.2)]
    node, transition = resolve_crossing(geom, tangent, DEFAULT_SETTINGS)
    assert node is None
    assert TRANSITION_DEGENERATE in transition.annotations
    assert 'uncertified' in transition.annotations

    transversal = [NodeCandidate((0.4, 0.2), (0.1, 0.2), (1.0, -0.5), 0.5)]
    assert resolve_crossing(geom, transversal, DEFAULT_SETTINGS) == (None, None)


def test_best_certified_member_represents_the_crossing(monkeypatch):
    geom = make_geometry(1, 0.5, 0, 0.5, 0.7)
    residuals = iter([(1e-3, 1e-3), (1e-12, 1e-12)])
    monkeypatch.setattr('services.singularity.certify_critical_point', lambda *args, **kwargs: next(residuals))
    cluster = [NodeCandidate((0.4, 0.2), (0.1, 0.2), (1.0, -0.5), 1e-5),
               NodeCandidate((0.4005, 0.2), (0.1, 0.2), (1.0, -0.5), 0.2)]
    node, transition = resolve_crossing(geom, cluster, DEFAULT_SETTINGS)
    assert transition is None
    assert node.location.rho == pytest.approx(0.4005 * geom.L)
    assert node.kind == NODE


@pytest.mark.slow
def test_near_tangent_contacts_are_not_counted_as_nodes(analysis):
    # published example whose two singular sheets nearly touch off the axis
    result = analysis('I3_caption')
    singular = result.singular
    assert [n for n in singular.nodes if not n.on_axis] == []
    assert result.topology.n_nodes_offaxis == 0
    for point in singular.transition_points:
        assert 'uncertified' in point.annotations
        assert point not in singular.nodes
    for point in singular.nodes:
        assert max(abs(r) for r in point.residuals) < DEFAULT_SETTINGS.cert_eps
