"""
Tests for family/type classification, separating surfaces and the
published table metadata.
"""
import math

import pytest

from services.classifier import (
    GENERIC,
    GENERIC_R3ZERO,
    OTHER,
    POOR_TYPES,
    TABLE1,
    TYPE_LABELS,
    WELL_CONNECTED_TYPES,
    case_i_delta,
    classify,
    evaluate_surfaces,
    family_case,
    separating_surfaces_r3zero,
    sigma2_roots,
    table1_properties,
)
from services.errors import UnknownTypeError
from services.geometry import ManipulatorGeometry, make_geometry


def label(*params):
    return classify(make_geometry(*params), analyze=False).type_label


@pytest.mark.parametrize('params, family', [
    ((0, 2, 1, 0, 1.5), 'A'),
    ((0, 2, 0, 0, 1), 'B'),
    ((0, 0, 1.5, 0, 2), 'C'),
    ((2, 3, 0, 0, 1), 'D'),
    ((1, 0, 0, 0, 1.5), 'E'),
    ((0, 2, 1, 1, 1.5), 'F'),
    ((0, 1, 0, 1, 3), 'G'),
    ((0, 0, 3, 1, 1), 'H'),
    ((1, 3, 0, 0.5, 2), 'I'),
    ((1, 0, 0, 1, 2), 'J'),
    ((1, 3, 2, 0, 4), GENERIC_R3ZERO),
    ((1, 3, 2, 0.5, 4), GENERIC),
    ((1, 0, 2, 0.5, 4), OTHER),
])
def test_family_tree(params, family):
    assert family_case(make_geometry(*params)).label == family


@pytest.mark.parametrize('params, expected', [
    ((0, 2, 1, 0, 1.5), 'A1'),
    ((0, 2, 1.5, 0, 2.2), 'A2'),
    ((0, 2, 1, 0, 3), 'A3'),
    ((0, 2, 0, 0, 1), 'B1'),
    ((0, 2, 0, 0, 3), 'B2'),
    ((0, 0, 1.5, 0, 2), 'C'),
    ((1, 0, 0, 0, 1.5), 'E'),
    ((0, 2, 1, 1, 1.5), 'F1'),
    ((0, 1, 1, 1, 2), 'F2'),
    ((0, 1, 0, 1, 3), 'G'),
    ((0, 0, 3, 1, 1), 'H'),
    ((1, 0, 0, 1, 2), 'J'),
])
def test_type_labels(params, expected):
    assert label(*params) == expected


@pytest.mark.parametrize('d2, d3, d4, expected', [
    (2, 3, 1, 'D1'),
    (1, 3, 2, 'D2'),
    (1, 2, 3, 'D3'),
    (2, 1, 3, 'D4'),
    (3, 1, 2, 'D5'),
    (3, 2, 1, 'D6'),
])
def test_case_d_labels_follow_length_ordering(d2, d3, d4, expected):
    assert label(d2, d3, 0, 0, d4) == expected


@pytest.mark.parametrize('params, expected', [
    ((0, 2, 1, 0, 2), 'Transition A1-A2'),
    ((0, 3, 4, 0, 5), 'Transition A2-A3'),
    ((0, 2, 0, 0, 2), 'Transition B1-B2'),
    ((0, 2, 1, 1, math.sqrt(5)), 'Transition F1-F2'),
    ((2, 3, 0, 0, 2), 'Transition D1-D2'),
    ((1, 2, 0, 0, 2), 'Transition D2-D3'),
    ((3, 1, 0, 0, 1), 'Transition D5-D6'),
    ((1, 1, 0, 0, 2), 'Transition D3-D4'),
    ((1, 1, 0, 0, 0.5), 'Transition D1-D6'),
    ((1, 0.5, 0, 0, 1), 'Transition D4-D5'),
    ((1, 0.6, 0, 0, 0.6), 'Transition D5-D6'),
])
def test_transition_labels(params, expected):
    result = classify(make_geometry(*params), analyze=False)
    assert result.type_label == expected
    assert result.is_transition
    assert result.table1 is None


def test_surface_residuals_are_signed_and_normalized():
    geom = make_geometry(0, 2, 1, 0, 3)
    surfaces = {s.surface: s for s in evaluate_surfaces(geom, family_case(geom))}
    assert surfaces['E2'].residual == pytest.approx(1 / 6)
    assert surfaces['E2'].side == 'above'
    assert surfaces['E3'].residual == pytest.approx((3 - math.sqrt(5)) / 6)


def test_case_d_surfaces_are_the_length_equalities():
    geom = make_geometry(1, 2, 0, 0, 1.5)
    surfaces = evaluate_surfaces(geom, family_case(geom))
    assert {s.surface for s in surfaces} == {'D_equalities'}
    planes = {s.aux['plane']: s.residual for s in surfaces}
    L = geom.L
    assert planes == {'d4=d2': pytest.approx(0.5 / L), 'd4=d3': pytest.approx(-0.5 / L),
                      'd3=d2': pytest.approx(1 / L)}
    assert all(s.to_dict()['aux']['plane'] in planes for s in surfaces)


def test_sigma1_crossing_detected():
    geom = make_geometry(0, 2, 1, 1, math.sqrt(5))
    (sigma1,) = evaluate_surfaces(geom, family_case(geom))
    assert sigma1.surface == 'Sigma1'
    assert abs(sigma1.residual) < 1e-9
    assert sigma1.side == 'on'


def test_case_i_delta_value():
    geom = make_geometry(1, 3, 0, 0.5, 2)
    assert case_i_delta(geom) == pytest.approx(math.sqrt(33 / 32), abs=1e-12)


def test_general_node_surface_reduces_to_delta():
    geom = make_geometry(1, 3, 0, 0.5, 2)
    assert sigma2_roots(geom) == [pytest.approx(case_i_delta(geom), abs=1e-12)]


def test_case_i_delta_undefined_on_asymptote():
    geom = ManipulatorGeometry(1.0, 1.0, 0.0, 0.5, 2.0)
    assert case_i_delta(geom) is None
    result = classify(geom, analyze=False)
    assert any(w.startswith('SurfaceUndefined') for w in result.warnings)
    assert result.surfaces[0].to_dict()['residual'] is None


@pytest.mark.parametrize('params, expected', [
    ((1, 3, 0, 0.5, 2), 'I1'),
    ((1, 3, 0, 0.5, 0.5), 'I2'),
])
def test_case_i_labels_above_asymptote(params, expected):
    assert label(*params) == expected


def test_case_i_labels_below_asymptote():
    # d3 < d2: delta = d2 * sqrt(1 - r3^2 / (d2^2 - d3^2))
    geom = make_geometry(2, 1, 0, 0.5, 3)
    delta = case_i_delta(geom)
    assert delta == pytest.approx(2 * math.sqrt(1 - 0.25 / 3))
    assert classify(geom, analyze=False).type_label == 'I3'
    assert label(2, 1, 0, 0.5, 1) == 'I4'


def test_r3zero_surfaces_for_generic_arm():
    geom = make_geometry(1, 3, 2, 0, 4)
    values = separating_surfaces_r3zero(geom)
    a = math.hypot(4, 2)
    b = math.hypot(2, 2)
    assert values == {'E1': pytest.approx((a - b) / 2), 'E2': 3, 'E3': pytest.approx((a + b) / 2)}
    result = classify(geom, analyze=False)
    assert result.type_label is None
    assert [s.surface for s in result.surfaces] == ['E1', 'E2', 'E3']


def test_other_family_warns_and_has_no_label():
    result = classify(make_geometry(1, 0, 2, 0.5, 4), analyze=False)
    assert result.type_label is None
    assert any('outside the ten families' in w for w in result.warnings)


def test_table_has_every_type():
    assert set(TABLE1) == set(TYPE_LABELS)
    assert len(TYPE_LABELS) == 22


def test_well_connected_types():
    assert {t for t in TYPE_LABELS if table1_properties(t)['well_connected']} == WELL_CONNECTED_TYPES
    assert all(table1_properties(t)['poor_performance'] == (t in POOR_TYPES) for t in TYPE_LABELS)


def test_table_rows():
    row = table1_properties('D6')
    assert (row['voids'], row['nodes'], row['t_connected']) == (1, 0, True)
    assert row['provenance'] == 'published classification table'
    assert table1_properties('A3')['nodes'] == 4
    assert table1_properties('I4')['annotations']
    with pytest.raises(UnknownTypeError):
        table1_properties('Z9')


def test_label_annotations_surface_as_warnings():
    result = classify(make_geometry(2, 3, 0, 0, 1), analyze=False)
    assert result.type_label == 'D1'
    assert any(w.startswith('D1:') for w in result.warnings)


@pytest.mark.slow
@pytest.mark.parametrize('name', ['A1', 'A3', 'B1', 'C', 'J', 'D6'])
def test_computed_topology_agrees_with_table(name, geometry, analysis):
    result = classify(geometry(name), computed=analysis(name).topology)
    assert result.type_label == name
    assert result.consistent is True


@pytest.mark.slow
def test_published_i3_example_keeps_inequality_label(geometry, analysis):
    result = classify(geometry('I3_caption'), computed=analysis('I3_caption').topology)
    assert result.type_label == 'I4'
    assert (result.computed.n_voids, result.computed.n_nodes_offaxis) == (1, 0)
    assert result.consistent is False
    assert any('differs from the table row for I4' in w for w in result.warnings)
