"""
Region decomposition of the (rho, z) half-plane.

The singular images are burnt into a raster as barriers; the remaining
cells are flood-filled into regions and every region is probed with the
inverse-kinematics solver at the cells farthest from any barrier.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from config import DEFAULT_SETTINGS, AnalysisSettings
from services.errors import UnresolvedRegionError
from services.geometry import CrossSectionPoint, ManipulatorGeometry
from services.ik_solver import count_ik
from services.singularity import CriticalPoint, PlanarCurve, SingularSet, analyze_singularities

logger = logging.getLogger(__name__)

BOX_MARGIN = 1.05
SAMPLES_PER_REGION = 5
ADJACENCY_REACH = np.ones((5, 5), dtype=bool)
MIN_SHARED_CELLS = 6
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass
class Region:
    id: int
    sample_points: List[CrossSectionPoint]
    ik_count: int
    touches_frame: bool
    area_estimate: float
    cell_count: int = 0
    sample_counts: List[int] = field(default_factory=list)
    isolated_points: List[CrossSectionPoint] = field(default_factory=list)

    @property
    def resolved(self) -> bool:
        return len(set(self.sample_counts)) <= 1

    def to_dict(self) -> Dict:
        return {
            'id': self.id,
            'ik_count': self.ik_count,
            'touches_frame': self.touches_frame,
            'area_estimate': float(self.area_estimate),
            'cell_count': self.cell_count,
            'sample_points': [[float(p.rho), float(p.z)] for p in self.sample_points],
            'isolated_points': [[float(p.rho), float(p.z)] for p in self.isolated_points],
        }


@dataclass(frozen=True)
class RasterFrame:
    """Cell grid over rho in [0, 1.05 L], z in [-1.05 L, 1.05 L]; axis 0 is z."""

    L: float
    raster_n: int

    @property
    def shape(self) -> Tuple[int, int]:
        return self.raster_n, self.raster_n // 2

    @property
    def cell(self) -> float:
        return 2.0 * BOX_MARGIN * self.L / self.raster_n

    @property
    def extent(self) -> Tuple[float, float, float, float]:
        """(rho_min, rho_max, z_min, z_max)"""
        return 0.0, BOX_MARGIN * self.L, -BOX_MARGIN * self.L, BOX_MARGIN * self.L

    def index(self, rho, z):
        """Row (z) and column (rho) indices of the cells holding the points."""
        rows = np.floor((np.asarray(z) + BOX_MARGIN * self.L) / self.cell).astype(int)
        cols = np.floor(np.asarray(rho) / self.cell).astype(int)
        return np.clip(rows, 0, self.shape[0] - 1), np.clip(cols, 0, self.shape[1] - 1)

    def center(self, row: int, col: int) -> CrossSectionPoint:
        return CrossSectionPoint((col + 0.5) * self.cell, -BOX_MARGIN * self.L + (row + 0.5) * self.cell)


@dataclass
class RegionMap:
    """Raster labelling plus everything derived from it."""

    frame: RasterFrame
    labels: np.ndarray
    barrier: np.ndarray
    regions: List[Region]
    summary: Dict[str, int]
    adjacency: List[Tuple[int, int, int]] = field(default_factory=list)
    # equal-count regions meeting only through a pinch or a sub-cell sliver
    pinch_contacts: List[Tuple[int, int]] = field(default_factory=list)
    unresolved: List[int] = field(default_factory=list)

    def count_image(self) -> np.ndarray:
        """Per-cell ik_count, -1 on barriers and dropped artifacts."""
        lookup = np.full(len(self.regions) + 1, -1, dtype=int)
        for region in self.regions:
            lookup[region.id] = region.ik_count
        return lookup[self.labels]

    def region_at(self, rho: float, z: float) -> Optional[Region]:
        row, col = self.frame.index(rho, z)
        label = int(self.labels[row, col])
        if label == 0:
            # on a barrier: take the nearest labelled cell
            _, (rows, cols) = ndimage.distance_transform_edt(self.labels == 0, return_indices=True)
            label = int(self.labels[rows[row, col], cols[row, col]])
        return self.regions[label - 1] if label > 0 else None


@dataclass
class WorkspaceTopology:
    n_cusps: int
    n_nodes_offaxis: int
    n_nodes_onaxis: int
    n_isolated_points: int
    n_voids: int
    regions: List[Region]
    max_ik: int
    well_shaped: Dict[str, bool]

    @property
    def workspace_regions(self) -> List[Region]:
        return [r for r in self.regions if r.ik_count > 0]

    @property
    def region_counts(self) -> List[int]:
        return sorted(r.ik_count for r in self.workspace_regions)

    def signature(self) -> Tuple:
        """Integer tuple used for scale and determinism comparisons."""
        return (self.n_cusps, self.n_nodes_offaxis, self.n_nodes_onaxis, self.n_isolated_points,
                self.n_voids, tuple(self.region_counts), self.max_ik)

    def to_dict(self) -> Dict:
        return {
            'n_cusps': self.n_cusps,
            'n_nodes_offaxis': self.n_nodes_offaxis,
            'n_nodes_onaxis': self.n_nodes_onaxis,
            'n_isolated_points': self.n_isolated_points,
            'n_voids': self.n_voids,
            'max_ik': self.max_ik,
            'region_counts': self.region_counts,
            'well_shaped': dict(self.well_shaped),
            'regions': [r.to_dict() for r in self.regions],
        }


def _burn_barriers(frame: RasterFrame, curves: Sequence[PlanarCurve]) -> np.ndarray:
    barrier = np.zeros(frame.shape, dtype=bool)
    half_cell = 0.5 * frame.cell
    for curve in curves:
        if curve.degenerate_to_point or len(curve.vertices) < 2:
            continue
        points = np.vstack([curve.vertices, curve.vertices[:1]]) if curve.closed else curve.vertices
        steps = np.diff(points, axis=0)
        pieces = np.maximum(1, np.ceil(np.hypot(steps[:, 0], steps[:, 1]) / half_cell).astype(int))
        owner = np.repeat(np.arange(len(steps)), pieces)
        fraction = (np.arange(pieces.sum()) - np.repeat(np.cumsum(pieces) - pieces, pieces)) / pieces[owner]
        samples = points[owner] + fraction[:, None] * steps[owner]
        samples = np.vstack([samples, points[-1:]])
        rows, cols = frame.index(samples[:, 0], samples[:, 1])
        barrier[rows, cols] = True
    return barrier


def _sample_cells(labels: np.ndarray, distance: np.ndarray, label: int, slices) -> List[Tuple[int, int]]:
    window = labels[slices] == label
    local = np.where(window, distance[slices], -1.0)
    flat = np.argsort(local, axis=None, kind='stable')[::-1][:SAMPLES_PER_REGION]
    rows, cols = np.unravel_index(flat, window.shape)
    picked = [(int(r + slices[0].start), int(c + slices[1].start))
              for r, c in zip(rows, cols) if window[r, c]]
    return picked


def _adjacency(labels: np.ndarray, regions: List[Region]):
    """
    Region pairs whose dilations overlap, with their count difference.

    Crossing one fold sheet changes the count by 2, so two regions with
    the same count cannot share a single sheet: such a contact is a pinch
    (two sheets meeting, often on the axis) or a sliver thinner than a
    cell, and goes to the second list instead.
    """
    pairs, pinches = [], []
    objects = ndimage.find_objects(labels)
    pad = ADJACENCY_REACH.shape[0] // 2
    for region in regions:
        slices = objects[region.id - 1]
        if slices is None:
            continue
        window = tuple(slice(max(s.start - pad, 0), s.stop + pad) for s in slices)
        mask = labels[window] == region.id
        grown = ndimage.binary_dilation(mask, structure=ADJACENCY_REACH)
        neighbours = Counter(labels[window][grown & ~mask].tolist())
        neighbours.pop(0, None)
        for other, shared in sorted(neighbours.items()):
            if other > region.id and shared >= MIN_SHARED_CELLS:
                diff = abs(regions[other - 1].ik_count - region.ik_count)
                if diff == 0:
                    logger.debug(f"Regions {region.id} and {other} touch through a pinch ({shared} cells)")
                    pinches.append((region.id, other))
                else:
                    pairs.append((region.id, other, diff))
    return pairs, pinches


def _build_region_map(geom: ManipulatorGeometry, curves: Sequence[PlanarCurve], raster_n: int,
                      settings: AnalysisSettings) -> RegionMap:
    frame = RasterFrame(geom.L, raster_n)
    barrier = _burn_barriers(frame, curves)
    raw, n_raw = ndimage.label(~barrier, structure=FOUR_CONNECTED)

    sizes = np.bincount(raw.ravel(), minlength=n_raw + 1)
    keep = np.zeros(n_raw + 1, dtype=bool)
    keep[1:] = sizes[1:] >= settings.min_region_cells
    renumber = np.zeros(n_raw + 1, dtype=int)
    renumber[keep] = np.arange(1, int(keep.sum()) + 1)
    labels = renumber[raw]
    artifact_cells = int(sizes[1:][~keep[1:]].sum())
    if artifact_cells:
        logger.debug(f"Dropped {int((~keep[1:]).sum())} raster artifact(s), {artifact_cells} cells")

    padded = np.pad(labels > 0, 1, constant_values=False)
    distance = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    border = np.zeros(frame.shape, dtype=bool)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    on_border = set(np.unique(labels[border]).tolist())

    regions: List[Region] = []
    unresolved: List[int] = []
    cell_area = frame.cell ** 2
    for label, slices in enumerate(ndimage.find_objects(labels), start=1):
        if slices is None:
            continue
        cells = _sample_cells(labels, distance, label, slices)
        points = [frame.center(r, c) for r, c in cells]
        counts = [count_ik(geom, p.rho, p.z, tol=settings.ik_tol) for p in points]
        majority = Counter(counts).most_common(1)[0][0] if counts else 0
        cell_count = int(np.count_nonzero(labels[slices] == label))
        region = Region(label, points, majority, label in on_border,
                        cell_count * cell_area, cell_count, counts)
        if not region.resolved or majority % 2:
            unresolved.append(label)
        regions.append(region)

    summary = {
        'total_cells': int(barrier.size),
        'barrier_cells': int(barrier.sum()),
        'region_cells': int(sum(r.cell_count for r in regions)),
        'artifact_cells': artifact_cells,
    }
    region_map = RegionMap(frame, labels, barrier, regions, summary, unresolved=unresolved)
    region_map.adjacency, region_map.pinch_contacts = _adjacency(labels, regions)
    return region_map


def build_region_map(geom: ManipulatorGeometry, curves: Sequence[PlanarCurve],
                     settings: AnalysisSettings = DEFAULT_SETTINGS,
                     warnings: Optional[List[str]] = None) -> RegionMap:
    """
    Raster decomposition with up to max_raster_refinements doublings while
    any region's interior samples disagree.

    Raises:
        UnresolvedRegionError: samples still disagree and settings.strict is set
    """
    if settings.raster_n < 200:
        raise ValueError(f"raster_n must be >= 200, got {settings.raster_n}")
    raster_n = settings.raster_n
    for attempt in range(settings.max_raster_refinements + 1):
        region_map = _build_region_map(geom, curves, raster_n, settings)
        if not region_map.unresolved:
            return region_map
        logger.warning(f"Unresolved region(s) {region_map.unresolved} at raster {raster_n}")
        if attempt < settings.max_raster_refinements:
            raster_n *= 2

    details = ', '.join(
        f"region {r.id} samples {r.sample_counts}" for r in region_map.regions if r.id in region_map.unresolved)
    message = f"UnresolvedRegion: interior samples disagree after refinement ({details})"
    if settings.strict:
        raise UnresolvedRegionError(message)
    logger.warning(message)
    if warnings is not None:
        warnings.append(message)
    return region_map


def decompose_regions(geom: ManipulatorGeometry, curves: Sequence[PlanarCurve], raster_n: int = 800,
                      settings: AnalysisSettings = DEFAULT_SETTINGS) -> List[Region]:
    """Regions of the bounding box cut out by the non-degenerate singular images."""
    return build_region_map(geom, curves, settings.with_overrides(raster_n=raster_n)).regions


def detect_voids(regions: Sequence[Region]) -> List[Region]:
    """Bounded unreachable regions: count 0 and not touching the frame."""
    return [r for r in regions if r.ik_count == 0 and not r.touches_frame]


def annotate_isolated_points(region_map: RegionMap, points: Sequence[CriticalPoint]) -> None:
    for point in points:
        region = region_map.region_at(point.location.rho, point.location.z)
        if region is not None:
            region.isolated_points.append(point.location)


def summarize_topology(singular: SingularSet, regions: Sequence[Region]) -> WorkspaceTopology:
    workspace = [r for r in regions if r.ik_count > 0]
    max_ik = max((r.ik_count for r in regions), default=0)
    single_four = len(workspace) == 1 and workspace[0].ik_count == 4
    return WorkspaceTopology(
        n_cusps=len(singular.cusps),
        n_nodes_offaxis=sum(1 for n in singular.nodes if not n.on_axis),
        n_nodes_onaxis=sum(1 for n in singular.nodes if n.on_axis),
        n_isolated_points=len(singular.isolated),
        n_voids=len(detect_voids(regions)),
        regions=list(regions),
        max_ik=max_ik,
        well_shaped={'single_4region_covers_workspace': single_four, 'binary': max_ik == 2},
    )


@dataclass
class WorkspaceAnalysis:
    """Singular set, region map and topology of one geometry."""

    geometry: ManipulatorGeometry
    settings: AnalysisSettings
    singular: SingularSet
    region_map: RegionMap
    topology: WorkspaceTopology
    warnings: List[str] = field(default_factory=list)

    @property
    def critical_points(self) -> List[CriticalPoint]:
        return self.singular.critical_points

    def adjacency_violations(self) -> List[Tuple[int, int, int]]:
        return [pair for pair in self.region_map.adjacency if pair[2] not in (2, 4)]

    def raster_conserved(self) -> bool:
        s = self.region_map.summary
        return s['region_cells'] + s['barrier_cells'] + s['artifact_cells'] == s['total_cells']


@lru_cache(maxsize=16)
def analyze_workspace(geom: ManipulatorGeometry,
                      settings: AnalysisSettings = DEFAULT_SETTINGS) -> WorkspaceAnalysis:
    """
    Singularity analysis, region decomposition and topology for one geometry.

    Cached per (geometry, settings); treat the result as read-only.
    """
    singular = analyze_singularities(geom, settings)
    warnings = list(singular.warnings)
    region_map = build_region_map(geom, singular.planar_curves, settings, warnings)
    annotate_isolated_points(region_map, singular.isolated)
    topology = summarize_topology(singular, region_map.regions)

    for a, b, diff in region_map.adjacency:
        if diff not in (2, 4):
            warnings.append(f"Adjacent regions {a} and {b} differ by {diff} solutions")
    logger.info(f"Topology: {topology.n_cusps} cusp(s), {topology.n_nodes_offaxis} off-axis node(s), "
                f"{topology.n_voids} void(s), regions {topology.region_counts}")
    return WorkspaceAnalysis(geom, settings, singular, region_map, topology, warnings)


def topology_signature(geom: ManipulatorGeometry,
                       settings: AnalysisSettings = DEFAULT_SETTINGS) -> WorkspaceTopology:
    return analyze_workspace(geom, settings).topology


def probe_critical_point(geom: ManipulatorGeometry, point: CriticalPoint, radius: float,
                         tol: float = 1e-9) -> List[int]:
    """Solution counts at four points around a critical point, for local checks."""
    counts = []
    for angle in (0.25 * math.pi, 0.75 * math.pi, 1.25 * math.pi, 1.75 * math.pi):
        rho = max(point.location.rho + radius * math.cos(angle), 0.0)
        counts.append(count_ik(geom, rho, point.location.z + radius * math.sin(angle), tol=tol))
    return counts
