"""
Tests for the region decomposition, voids and topology summaries.
"""
import itertools

import numpy as np
import pytest

from config import AnalysisSettings
from services.errors import UnresolvedRegionError
from services.geometry import CrossSectionPoint, make_geometry
from services.ik_solver import count_ik
from services.topology import (
    RasterFrame,
    Region,
    _adjacency,
    build_region_map,
    decompose_regions,
    detect_voids,
    probe_critical_point,
)


def _region(id, count, touches):
    return Region(id, [CrossSectionPoint(1.0, 0.0)], count, touches, 1.0, 10, [count])


def test_raster_frame_geometry():
    frame = RasterFrame(10.0, 400)
    assert frame.shape == (400, 200)
    assert frame.cell == pytest.approx(2 * 1.05 * 10.0 / 400)
    rows, cols = frame.index(np.array([0.0, 10.5]), np.array([-10.5, 10.49]))
    assert rows.tolist() == [0, 399]
    assert cols.tolist() == [0, 199]
    center = frame.center(0, 0)
    assert center.rho == pytest.approx(0.5 * frame.cell)


def test_voids_are_enclosed_empty_regions():
    regions = [_region(1, 0, True), _region(2, 4, False), _region(3, 0, False), _region(4, 2, False)]
    assert [r.id for r in detect_voids(regions)] == [3]


@pytest.mark.parametrize('counts, adjacency, pinches', [
    ((0, 2), [(1, 2, 2)], []),
    ((0, 0), [], [(1, 2)]),
    ((2, 2), [], [(1, 2)]),
])
def test_equal_counts_across_a_barrier_are_a_pinch(counts, adjacency, pinches):
    labels = np.zeros((20, 21), dtype=int)
    labels[:, :10] = 1
    labels[:, 11:] = 2
    regions = [_region(1, counts[0], True), _region(2, counts[1], True)]
    assert _adjacency(labels, regions) == (adjacency, pinches)


def test_region_resolution_flag():
    region = Region(1, [], 4, False, 1.0, 10, [4, 4, 2])
    assert not region.resolved
    assert _region(1, 4, False).resolved


def test_region_map_rejects_coarse_raster():
    geom = make_geometry(0, 2, 1, 0, 1.5)
    with pytest.raises(ValueError):
        build_region_map(geom, [], AnalysisSettings(raster_n=100))


def test_decompose_without_curves_is_one_empty_region():
    geom = make_geometry(0, 2, 1, 0, 1.5)
    regions = decompose_regions(geom, [], raster_n=200)
    assert len(regions) == 1
    assert regions[0].touches_frame


@pytest.mark.slow
def test_generic_r3zero_example_regions(analysis):
    topology = analysis('fig3').topology
    assert topology.region_counts == [2, 2, 4, 4]
    assert topology.n_voids == 0
    assert topology.n_cusps == 2


@pytest.mark.slow
def test_case_a1_regions(analysis):
    topology = analysis('A1').topology
    assert topology.region_counts == [2, 2, 4]
    assert topology.n_nodes_offaxis == 0
    assert topology.n_voids == 0


@pytest.mark.slow
@pytest.mark.parametrize('name', ['B1', 'C', 'E', 'G', 'H'])
def test_well_connected_types_are_one_four_solution_region(name, analysis):
    topology = analysis(name).topology
    assert topology.n_cusps == 0
    assert topology.n_nodes_offaxis == 0
    assert topology.n_voids == 0
    assert topology.region_counts == [4]
    assert topology.well_shaped['single_4region_covers_workspace']


@pytest.mark.slow
def test_case_j_single_region_with_void(analysis):
    topology = analysis('J').topology
    assert topology.n_voids == 1
    assert topology.n_nodes_offaxis == 0
    assert topology.region_counts == [4]


# (voids, off-axis nodes) of the published example workspaces
CAPTION_SIGNATURES = {
    'D1': (1, 2),
    'D2': (0, 0),
    'D3': (0, 1),
    'D4': (0, 2),
    'D5': (0, 0),
    'D6': (1, 0),
    'I1': (0, 0),
    'I2': (1, 2),
    'I3_caption': (1, 0),
    'I4_caption': (1, 2),
}


@pytest.mark.slow
@pytest.mark.parametrize('name', sorted(CAPTION_SIGNATURES))
def test_published_example_signatures(name, analysis):
    result = analysis(name)
    topology = result.topology
    voids, nodes = CAPTION_SIGNATURES[name]
    assert topology.n_cusps == 0
    assert topology.n_nodes_offaxis == nodes
    assert topology.n_voids == voids
    assert all(count % 2 == 0 for count in topology.region_counts)
    assert result.adjacency_violations() == []
    assert result.raster_conserved()


@pytest.mark.slow
def test_case_d6_is_binary_with_void(analysis):
    topology = analysis('D6').topology
    assert topology.region_counts == [2]
    assert topology.max_ik == 2
    assert topology.well_shaped['binary']


@pytest.mark.slow
@pytest.mark.parametrize('name', ['D2', 'I2'])
def test_pinched_regions_are_not_adjacent(name, analysis):
    """Unreachable pockets cut off from the exterior only by an axis pinch."""
    region_map = analysis(name).region_map
    assert region_map.pinch_contacts
    counts = {r.id: r.ik_count for r in region_map.regions}
    for a, b in region_map.pinch_contacts:
        assert counts[a] == counts[b]
    for a, b, diff in region_map.adjacency:
        assert diff in (2, 4)
        assert diff == abs(counts[a] - counts[b])


@pytest.mark.slow
@pytest.mark.parametrize('name, nodes', [('F1', 0), ('F2', 2)])
def test_case_f_nodes(name, nodes, analysis):
    topology = analysis(name).topology
    assert topology.n_nodes_offaxis == nodes
    if name == 'F1':
        assert topology.region_counts == [2, 2, 4]


@pytest.mark.slow
@pytest.mark.parametrize('name', ['fig3', 'A1', 'A3', 'D1', 'J'])
def test_raster_bookkeeping_and_adjacency(name, analysis):
    result = analysis(name)
    assert result.raster_conserved()
    assert result.adjacency_violations() == []
    for region in result.topology.regions:
        assert region.resolved
        assert region.ik_count % 2 == 0


@pytest.mark.slow
def test_region_counts_match_direct_probes(analysis):
    result = analysis('fig3')
    for region in result.topology.regions:
        for point in region.sample_points:
            assert count_ik(result.geometry, point.rho, point.z) == region.ik_count


@pytest.mark.slow
def test_counts_change_across_a_node(analysis):
    result = analysis('A3')
    node = next(n for n in result.singular.nodes if not n.on_axis)
    counts = probe_critical_point(result.geometry, node, 0.01 * result.geometry.L)
    assert len(set(counts)) > 1
    assert all(c % 2 == 0 for c in counts)



def test_disagreeing_samples_raise_in_strict_mode(monkeypatch):
    answers = itertools.cycle([2, 4])
    monkeypatch.setattr('services.topology.count_ik', lambda *args, **kwargs: next(answers))
    geom = make_geometry(0, 2, 1, 0, 1.5)
    settings = AnalysisSettings(raster_n=200, max_raster_refinements=0, strict=True)
    with pytest.raises(UnresolvedRegionError):
        build_region_map(geom, [], settings)

    warnings = []
    region_map = build_region_map(geom, [], AnalysisSettings(raster_n=200, max_raster_refinements=0), warnings)
    assert region_map.unresolved == [1]
    assert warnings and warnings[0].startswith('UnresolvedRegion')
