"""
Singular curves on the (theta2, theta3) torus, their images in the
(rho, z) half-plane, and the cusps, nodes and isolated points on them.

All work happens on the geometry scaled to L = 1; locations are scaled
back before they leave this module, so every tolerance is relative.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import shapely
from numpy.polynomial import polynomial as npoly
from scipy import optimize, sparse
from scipy.sparse import csgraph

from config import DEFAULT_SETTINGS, AnalysisSettings
from services.errors import CertificationFailure
from services.geometry import (
    CrossSectionPoint,
    JacobianFactor,
    ManipulatorGeometry,
    angle_distance,
    cross_section_arrays,
    cross_section_jacobian,
    image_involutions,
    jacobian_det,
    jacobian_factors,
    normalize_angle,
    recover_theta2,
)
from services.ik_solver import quartic_coefficients, reduced_coefficients

logger = logging.getLogger(__name__)

CUSP = 'cusp'
NODE = 'node'
ISOLATED = 'isolated'
TRANSITION_DEGENERATE = 'transition-degenerate'

GRADIENT_STEP = 1e-6
REFINE_ITERATIONS = 8
# preimages closer than this many grid pitches are the same joint point
SAME_POINT_PITCHES = 3.0
# node candidates closer than this many pitches, on the same joint points, are one crossing
CLUSTER_PITCHES = 2.0 * SAME_POINT_PITCHES
# refined points closer than this (relative to L) are one point
REFINED_MERGE_TOL = 1e-6
POINT_ON_CURVE_TOL = 1e-3


@dataclass
class TorusCurve:
    """Closed (or, exceptionally, open) polyline on the joint torus."""

    vertices: np.ndarray
    closed: bool
    wrap_count: Tuple[int, int]
    factor: Optional[JacobianFactor] = None

    def __len__(self):
        return len(self.vertices)


@dataclass
class PlanarCurve:
    vertices: np.ndarray
    preimage: TorusCurve
    degenerate_to_point: bool

    @property
    def closed(self) -> bool:
        return self.preimage.closed


@dataclass
class CriticalPoint:
    kind: str
    location: CrossSectionPoint
    preimages: List[Tuple[float, float]]
    residuals: Tuple[float, ...] = ()
    on_axis: bool = False
    annotations: List[str] = field(default_factory=list)
    discriminant_dP: Optional[float] = None

    def to_dict(self) -> Dict:
        data = {
            'kind': self.kind,
            'rho': float(self.location.rho),
            'z': float(self.location.z),
            'preimages': [[float(a), float(b)] for a, b in self.preimages],
            'residuals': [float(r) for r in self.residuals],
            'on_axis': bool(self.on_axis),
            'annotations': list(self.annotations),
        }
        if self.discriminant_dP is not None:
            data['discriminant_dP'] = float(self.discriminant_dP)
        return data


def grid_angles(grid_n: int) -> np.ndarray:
    """Grid offset by half a pitch so analytic zero lines never hit a node."""
    return -math.pi + 2.0 * math.pi * (np.arange(grid_n) + 0.5) / grid_n


# ---------------------------------------------------------------------------
# Marching squares on the torus
# ---------------------------------------------------------------------------

def _march(values: np.ndarray, theta: np.ndarray):
    """
    Contour segments of values = 0 with periodic gluing.

    Corners of cell (i, j): c0=(i,j), c1=(i+1,j), c2=(i+1,j+1), c3=(i,j+1).
    Edge keys: 2*(i*n+j) for the theta2-edge from node (i,j), +1 for the
    theta3-edge.

    Returns:
        (segments as list of key pairs, key -> (theta2, theta3), saddle count)
    """
    n = values.shape[0]
    pitch = 2.0 * math.pi / n
    f = values
    f1 = np.roll(f, -1, 0)
    f3 = np.roll(f, -1, 1)
    f2 = np.roll(f1, -1, 1)
    p0, p1, p2, p3 = f > 0, f1 > 0, f2 > 0, f3 > 0
    case = p0 * 1 + p1 * 2 + p2 * 4 + p3 * 8
    active_i, active_j = np.nonzero((case != 0) & (case != 15))

    def h_key(i, j):
        return 2 * ((i % n) * n + (j % n))

    def v_key(i, j):
        return 2 * ((i % n) * n + (j % n)) + 1

    points: Dict[int, Tuple[float, float]] = {}

    def point(key):
        if key not in points:
            node, kind = divmod(key, 2)
            i, j = divmod(node, n)
            fa = f[i, j]
            fb = f[(i + 1) % n, j] if kind == 0 else f[i, (j + 1) % n]
            s = fa / (fa - fb) if fa != fb else 0.5
            if kind == 0:
                points[key] = (theta[i] + s * pitch, theta[j])
            else:
                points[key] = (theta[i], theta[j] + s * pitch)
        return key

    segments: List[Tuple[int, int]] = []
    saddles = 0
    for i, j in zip(active_i.tolist(), active_j.tolist()):
        c = int(case[i, j])
        e0, e1, e2, e3 = h_key(i, j), v_key(i + 1, j), h_key(i, j + 1), v_key(i, j)
        crossing = []
        if (c & 1) != ((c >> 1) & 1):
            crossing.append(e0)
        if ((c >> 1) & 1) != ((c >> 2) & 1):
            crossing.append(e1)
        if ((c >> 2) & 1) != ((c >> 3) & 1):
            crossing.append(e2)
        if ((c >> 3) & 1) != (c & 1):
            crossing.append(e3)
        if len(crossing) == 2:
            segments.append((point(crossing[0]), point(crossing[1])))
            continue
        saddles += 1
        center = 0.25 * (f[i, j] + f1[i, j] + f2[i, j] + f3[i, j])
        if (center > 0) == bool(c & 1):
            pairs = ((e0, e1), (e2, e3))
        else:
            pairs = ((e3, e0), (e1, e2))
        for a, b in pairs:
            segments.append((point(a), point(b)))
    return segments, points, saddles


def _chain(segments: List[Tuple[int, int]]):
    """Join segments sharing edge keys into ordered key chains."""
    adjacency: Dict[int, List[int]] = {}
    for index, (a, b) in enumerate(segments):
        adjacency.setdefault(a, []).append(index)
        adjacency.setdefault(b, []).append(index)

    visited = np.zeros(len(segments), dtype=bool)
    chains = []

    def walk(start_key, previous_segment, keys):
        key = start_key
        prev = previous_segment
        while True:
            following = [s for s in adjacency[key] if s != prev and not visited[s]]
            if not following:
                return False
            nxt = following[0]
            visited[nxt] = True
            a, b = segments[nxt]
            key = b if a == key else a
            prev = nxt
            if key == keys[0]:
                return True
            keys.append(key)

    for start in range(len(segments)):
        if visited[start]:
            continue
        visited[start] = True
        keys = list(segments[start])
        closed = walk(keys[-1], start, keys)
        if not closed:
            backward = [keys[0]]
            walk(keys[0], start, backward)
            keys = backward[:0:-1] + keys
        chains.append((keys, closed))
    return chains


def _unwrap(vertices: np.ndarray) -> np.ndarray:
    steps = normalize_angle(np.diff(vertices, axis=0))
    return np.vstack([vertices[:1], vertices[:1] + np.cumsum(steps, axis=0)])


def _factor_gradient(factor: JacobianFactor, t2, t3):
    h = GRADIENT_STEP
    g2 = (factor(t2 + h, t3) - factor(t2 - h, t3)) / (2.0 * h)
    g3 = (factor(t2, t3 + h) - factor(t2, t3 - h)) / (2.0 * h)
    return g2, g3


def _refine_vertices(factor: JacobianFactor, vertices: np.ndarray, tol: float) -> np.ndarray:
    """Transverse Newton: q -= f * grad f / |grad f|^2, vectorized."""
    t2 = vertices[:, 0].copy()
    t3 = vertices[:, 1].copy()
    for _ in range(REFINE_ITERATIONS):
        value = factor(t2, t3)
        if np.all(np.abs(value) < 1e-3 * tol):
            break
        g2, g3 = _factor_gradient(factor, t2, t3)
        norm2 = g2 * g2 + g3 * g3
        safe = norm2 > 1e-24
        scale = np.where(safe, value / np.where(safe, norm2, 1.0), 0.0)
        t2 = t2 - scale * g2
        t3 = t3 - scale * g3
    return np.column_stack([normalize_angle(t2), normalize_angle(t3)])


def _trace(geom: ManipulatorGeometry, grid_n: int, sing_eps: float):
    theta = grid_angles(grid_n)
    T2, T3 = np.meshgrid(theta, theta, indexing='ij')
    curves: List[TorusCurve] = []
    saddles = 0
    for factor in jacobian_factors(geom):
        values = factor(T2, T3)
        segments, points, factor_saddles = _march(values, theta)
        saddles += factor_saddles
        for keys, closed in _chain(segments):
            raw = np.array([points[k] for k in keys])
            vertices = _refine_vertices(factor, normalize_angle(raw), sing_eps)
            if closed:
                loop = _unwrap(np.vstack([vertices, vertices[:1]]))
                total = loop[-1] - loop[0]
                wrap = (int(round(total[0] / (2 * math.pi))), int(round(total[1] / (2 * math.pi))))
            else:
                wrap = (0, 0)
            curves.append(TorusCurve(vertices, closed, wrap, factor))
        logger.debug(f"Factor {factor.name}: {len(segments)} segments, {factor_saddles} saddle cells")
    return curves, saddles


def joint_space_singular_curves(geom: ManipulatorGeometry, grid_n: int = 720,
                                sing_eps: float = 1e-9,
                                warnings: Optional[List[str]] = None) -> List[TorusCurve]:
    """
    Trace det(J) = 0 on the torus, one determinant factor at a time.

    Saddle cells (four sign changes) trigger one retrace at twice the grid.
    """
    if grid_n < 64:
        raise ValueError(f"grid_n must be >= 64, got {grid_n}")
    unit = geom.normalized()
    curves, saddles = _trace(unit, grid_n, sing_eps)
    if saddles:
        message = (f"ResolutionWarning: {saddles} saddle cell(s) at grid {grid_n}; "
                   f"retracing at {2 * grid_n}")
        logger.warning(message)
        if warnings is not None:
            warnings.append(message)
        curves, saddles = _trace(unit, 2 * grid_n, sing_eps)
    return curves


def workspace_singular_image(geom: ManipulatorGeometry, curves: Sequence[TorusCurve],
                             point_eps: float = 1e-7) -> List[PlanarCurve]:
    """Vertex-wise images of the torus curves in the (rho, z) half-plane."""
    images = []
    for curve in curves:
        rho, z = cross_section_arrays(geom, curve.vertices[:, 0], curve.vertices[:, 1])
        vertices = np.column_stack([rho, z])
        span = vertices.max(axis=0) - vertices.min(axis=0)
        degenerate = bool(np.hypot(*span) < point_eps * geom.L)
        images.append(PlanarCurve(vertices, curve, degenerate))
    return images


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def _normalized_quartic(coeffs: np.ndarray, t: float):
    """Coefficients and evaluation point, switched to u = 1/t when |t| > 1."""
    scale = float(np.max(np.abs(coeffs))) or 1.0
    coeffs = coeffs / scale
    if abs(t) > 1.0:
        return coeffs[::-1], 1.0 / t
    return coeffs, t


def _cubic_discriminant(coeffs: np.ndarray) -> float:
    d, c, b, a = coeffs
    return float(18 * a * b * c * d - 4 * b ** 3 * d + b * b * c * c - 4 * a * c ** 3 - 27 * a * a * d * d)


def certify_critical_point(geom: ManipulatorGeometry, point: CriticalPoint, kind: str = None) -> Tuple[float, ...]:
    """
    Algebraic residuals of a critical point on the L = 1 geometry.

    cusp (d2 > 0): P, P', P'' at the preimage's t.
    node (d2 > 0): P and P' at both preimages (two double roots).
    cusp (d2 = 0): h, h' and h'' of the reduced equation h = A s3 + B c3 + C.
    node (d2 = 0): at both preimages, the reduced equation and the product
    of its theta3-derivative with the branch discriminant F^2 + r3^2 - Z.
    isolated: image diameter of the collapsed curve, relative to L.

    The point is not modified.
    """
    kind = kind or point.kind
    L = geom.L
    unit = geom.normalized()
    R = (point.location.rho / L) ** 2
    Z = (point.location.z / L) ** 2

    if kind == ISOLATED:
        return tuple(point.residuals[:1]) or (0.0,)

    if unit.d2 > 0:
        coeffs = quartic_coefficients(unit, R, Z)
        residuals = []
        orders = (0, 1, 2) if kind == CUSP else (0, 1)
        preimages = point.preimages[:1] if kind == CUSP else point.preimages[:2]
        for _, theta3 in preimages:
            if abs(abs(theta3) - math.pi) < 1e-12:
                # t = inf: u = 1/t = 0 on the reversed polynomial
                work, _ = _normalized_quartic(coeffs, 2.0)
                at = 0.0
            else:
                work, at = _normalized_quartic(coeffs, math.tan(0.5 * theta3))
            for order in orders:
                residuals.append(float(npoly.polyval(at, npoly.polyder(work, order) if order else work)))
        return tuple(residuals)

    A, B, C = reduced_coefficients(unit, R, Z)
    h_scale = max(abs(A), abs(B), abs(C)) or 1.0
    amplitude = math.hypot(A, B) or 1.0
    if kind == CUSP:
        s3, c3 = math.sin(point.preimages[0][1]), math.cos(point.preimages[0][1])
        return ((A * s3 + B * c3 + C) / h_scale, (A * c3 - B * s3) / h_scale, -(A * s3 + B * c3) / h_scale)
    residuals = []
    for _, theta3 in point.preimages[:2]:
        s3, c3 = math.sin(theta3), math.cos(theta3)
        F = unit.d3 + unit.d4 * c3
        residuals.append((A * s3 + B * c3 + C) / h_scale)
        residuals.append((A * c3 - B * s3) / amplitude * (F * F + unit.r3 ** 2 - Z))
    return tuple(residuals)


def node_dp_discriminant(geom: ManipulatorGeometry, point: CriticalPoint) -> Optional[float]:
    """Discriminant of P' at the node location, normalized (d2 > 0 only)."""
    if geom.d2 <= 0:
        return None
    unit = geom.normalized()
    coeffs = quartic_coefficients(unit, (point.location.rho / geom.L) ** 2, (point.location.z / geom.L) ** 2)
    derivative = npoly.polyder(coeffs / (np.max(np.abs(coeffs)) or 1.0))
    return _cubic_discriminant(derivative)


# ---------------------------------------------------------------------------
# Cusps
# ---------------------------------------------------------------------------

def _cusp_equations(unit: ManipulatorGeometry, reverse: bool, scale: float):
    def equations(x):
        R, Z, w = x
        coeffs = quartic_coefficients(unit, R, Z) / scale
        if reverse:
            coeffs = coeffs[::-1]
        return [npoly.polyval(w, npoly.polyder(coeffs, k)) if k else npoly.polyval(w, coeffs)
                for k in (0, 1, 2)]
    return equations


def reversal_vertices(curve: PlanarCurve, L: float) -> np.ndarray:
    """Vertex indices where the image polyline turns back on itself."""
    if curve.degenerate_to_point or len(curve.vertices) < 3:
        return np.array([], dtype=int)
    image = curve.vertices / L
    steps = np.diff(np.vstack([image, image[:1]]) if curve.closed else image, axis=0)
    dots = np.einsum('ij,ij->i', steps[:-1], steps[1:])
    return (np.nonzero(dots < 0)[0] + 1) % len(image)


def detect_cusps(geom: ManipulatorGeometry, planar_curves: Optional[Sequence[PlanarCurve]] = None,
                 settings: AnalysisSettings = DEFAULT_SETTINGS) -> List[CriticalPoint]:
    """
    Cusps: points where the inverse polynomial has a triple root.

    Candidates are vertices where the image of a singular curve reverses
    direction. With d2 > 0 each is refined on (P, P', P'') = 0 in (R, Z, t);
    with d2 = 0 the vertex itself is certified on the reduced equation.
    Only certified candidates are returned.
    """
    L = geom.L
    unit = geom.normalized()
    if planar_curves is None:
        planar_curves = workspace_singular_image(
            geom, joint_space_singular_curves(geom, settings.grid_n, settings.sing_eps), settings.point_eps)
    # a doubly covered image folds back at its ends without any triple root
    folded = bool(image_involutions(geom, settings.zero_eps))

    found: List[CriticalPoint] = []
    candidates = 0
    for curve in planar_curves:
        image = curve.vertices / L
        for index in reversal_vertices(curve, L):
            candidates += 1
            theta2, theta3 = curve.preimage.vertices[index]
            rho0, z0 = image[index]
            if unit.d2 > 0:
                candidate = _refine_cusp(unit, rho0, z0, float(theta3), settings)
                if candidate is None:
                    continue
                rho, z, t3 = candidate
                K = rho * rho + z * z - (unit.d2 ** 2 + unit.d3 ** 2 + unit.d4 ** 2 + unit.r2 ** 2 + unit.r3 ** 2)
                U = (K - 2 * unit.d3 * unit.d4 * math.cos(t3) - 2 * unit.r2 * unit.d4 * math.sin(t3)) / (2 * unit.d2)
                t2 = float(recover_theta2(unit, t3, U, z))
            else:
                rho, z, t2, t3 = float(rho0), float(z0), float(theta2), float(theta3)
            if any(math.hypot(rho - c.location.rho / L, z - c.location.z / L) < REFINED_MERGE_TOL for c in found):
                continue
            point = CriticalPoint(CUSP, CrossSectionPoint(rho * L, z * L),
                                  [(normalize_angle(t2), normalize_angle(t3))],
                                  on_axis=rho < settings.axis_eps)
            point.residuals = certify_critical_point(geom, point)
            if max(abs(r) for r in point.residuals) > settings.cert_eps:
                failure = CertificationFailure(CUSP, (rho * L, z * L), point.residuals)
                if folded:
                    logger.debug(f"{failure}; fold of a doubly covered image")
                else:
                    logger.warning(str(failure))
                continue
            found.append(point)
    found.sort(key=lambda p: (p.location.rho, p.location.z))
    logger.debug(f"Detected {len(found)} cusp(s) from {candidates} reversal vertices")
    return found


def _refine_cusp(unit: ManipulatorGeometry, rho0: float, z0: float, theta3: float,
                 settings: AnalysisSettings):
    R0, Z0 = rho0 * rho0, z0 * z0
    t0 = math.tan(0.5 * theta3)
    reverse = abs(t0) > 1.0
    w0 = 1.0 / t0 if reverse else t0
    scale = float(np.max(np.abs(quartic_coefficients(unit, R0, Z0)))) or 1.0
    solution = optimize.root(_cusp_equations(unit, reverse, scale), [R0, Z0, w0], method='hybr')
    if not solution.success:
        return None
    R, Z, w = solution.x
    if Z < -1e-12 or R < -1e-12:
        return None
    if abs(R - R0) > 1e-2 or abs(Z - Z0) > 1e-2:
        return None
    t = (1.0 / w) if reverse and w != 0 else (math.inf if reverse else w)
    theta3_new = normalize_angle(2.0 * math.atan(t)) if not math.isinf(t) else -math.pi
    if angle_distance(theta3_new, theta3) > 0.1:
        return None
    coeffs = quartic_coefficients(unit, R, Z) / scale
    if reverse:
        coeffs = coeffs[::-1]
    third = abs(npoly.polyval(w, npoly.polyder(coeffs, 3)))
    if third < 1e-6:
        logger.debug("Cusp candidate rejected: quadruple root")
        return None
    rho = math.sqrt(max(R, 0.0))
    z = math.copysign(math.sqrt(max(Z, 0.0)), z0) if abs(z0) > 1e-12 else 0.0
    return rho, z, theta3_new


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------

def _image_tangent(unit: ManipulatorGeometry, factor: JacobianFactor, t2: float, t3: float) -> np.ndarray:
    """Unit tangent of the image curve in (rho, z) at a preimage point."""
    g2, g3 = _factor_gradient(factor, t2, t3)
    tau = np.array([-g3, g2])
    dR2, dR3, dz2, dz3 = cross_section_jacobian(unit, t2, t3)
    rho = float(cross_section_arrays(unit, t2, t3)[0])
    dR = dR2 * tau[0] + dR3 * tau[1]
    dz = dz2 * tau[0] + dz3 * tau[1]
    velocity = np.array([dR / (2.0 * rho) if rho > 1e-9 else dR, dz], dtype=float)
    norm = np.linalg.norm(velocity)
    return velocity / norm if norm > 0 else velocity


def _crossing_angle(unit, factor_a, pa, factor_b, pb) -> float:
    ta = _image_tangent(unit, factor_a, *pa)
    tb = _image_tangent(unit, factor_b, *pb)
    cosine = min(1.0, abs(float(np.dot(ta, tb))))
    return math.acos(cosine)


def _is_symmetric_pair(involutions, pa, pb, tol: float) -> bool:
    for mapping in involutions:
        m2, m3 = mapping(pa[0], pa[1])
        if angle_distance(m2, pb[0]) < tol and angle_distance(m3, pb[1]) < tol:
            return True
    return False


def _torus_distance(pa, pb) -> float:
    return float(math.hypot(angle_distance(pa[0], pb[0]), angle_distance(pa[1], pb[1])))


def _segment_table(planar_curves: Sequence[PlanarCurve], L: float):
    starts, ends, pre_starts, pre_ends, owner, position = [], [], [], [], [], []
    for index, curve in enumerate(planar_curves):
        if curve.degenerate_to_point or len(curve.vertices) < 2:
            continue
        image = curve.vertices / L
        pre = curve.preimage.vertices
        count = len(image) if curve.closed else len(image) - 1
        nxt = (np.arange(count) + 1) % len(image)
        starts.append(image[:count])
        ends.append(image[nxt])
        pre_starts.append(pre[:count])
        pre_ends.append(pre[:count] + normalize_angle(pre[nxt] - pre[:count]))
        owner.append(np.full(count, index))
        position.append(np.arange(count))
    if not starts:
        return None
    return (np.vstack(starts), np.vstack(ends), np.vstack(pre_starts), np.vstack(pre_ends),
            np.concatenate(owner), np.concatenate(position))


def _intersection_candidates(planar_curves, L: float, pitch: float, involutions):
    table = _segment_table(planar_curves, L)
    if table is None:
        return []
    a, b, pa, pb, owner, position = table
    lines = shapely.linestrings(np.stack([a, b], axis=1))
    tree = shapely.STRtree(lines)
    left, right = tree.query(lines, predicate='intersects')
    keep = left < right
    left, right = left[keep], right[keep]

    same = owner[left] == owner[right]
    gap = np.abs(position[left] - position[right])
    lengths = np.array([len(c.vertices) for c in planar_curves])
    cyclic_gap = np.minimum(gap, lengths[owner[left]] - gap)
    adjacent = same & (cyclic_gap <= 1)
    left, right = left[~adjacent], right[~adjacent]

    da = b[left] - a[left]
    db = b[right] - a[right]
    offset = a[right] - a[left]
    cross = da[:, 0] * db[:, 1] - da[:, 1] * db[:, 0]
    usable = np.abs(cross) > 1e-18
    left, right, da, db, offset, cross = (left[usable], right[usable], da[usable], db[usable],
                                          offset[usable], cross[usable])
    s = (offset[:, 0] * db[:, 1] - offset[:, 1] * db[:, 0]) / cross
    u = (offset[:, 0] * da[:, 1] - offset[:, 1] * da[:, 0]) / cross
    inside = (s >= -1e-9) & (s <= 1 + 1e-9) & (u >= -1e-9) & (u <= 1 + 1e-9)

    candidates = []
    for k in np.nonzero(inside)[0]:
        i, j = left[k], right[k]
        qa = normalize_angle(pa[i] + s[k] * (pb[i] - pa[i]))
        qb = normalize_angle(pa[j] + u[k] * (pb[j] - pa[j]))
        if _torus_distance(qa, qb) < SAME_POINT_PITCHES * pitch:
            continue
        if _is_symmetric_pair(involutions, qa, qb, SAME_POINT_PITCHES * pitch):
            continue
        location = a[i] + s[k] * da[k]
        candidates.append((int(owner[i]), tuple(qa), int(owner[j]), tuple(qb), tuple(location)))
    return candidates


def _refine_node(unit: ManipulatorGeometry, factor_a, qa, factor_b, qb):
    def equations(x):
        a2, a3, b2, b3 = x
        ra, za = cross_section_arrays(unit, a2, a3)
        rb, zb = cross_section_arrays(unit, b2, b3)
        return [factor_a(a2, a3), factor_b(b2, b3), ra * ra - rb * rb, za - zb]

    solution = optimize.root(equations, [qa[0], qa[1], qb[0], qb[1]], method='hybr',
                             options={'xtol': 1e-14})
    residual = float(np.max(np.abs(equations(solution.x))))
    return solution.x, residual


def _point_on_curve(unit: ManipulatorGeometry, curve: PlanarCurve, target: np.ndarray, L: float):
    """Preimage on curve whose image is target, or None."""
    image = curve.vertices / L
    nearest = int(np.argmin(np.hypot(*(image - target).T)))
    if math.hypot(*(image[nearest] - target)) > 0.05:
        return None
    factor = curve.preimage.factor
    R0, z0 = target[0] ** 2, target[1]

    def residuals(x):
        r, z = cross_section_arrays(unit, x[0], x[1])
        return [factor(x[0], x[1]), r * r - R0, z - z0]

    fit = optimize.least_squares(residuals, curve.preimage.vertices[nearest], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.max(np.abs(fit.fun)) > 1e-10:
        return None
    return normalize_angle(fit.x[0]), normalize_angle(fit.x[1])


class NodeCandidate(NamedTuple):
    """A refined crossing on the L = 1 geometry, not yet certified."""

    location: Tuple[float, float]
    qa: Tuple[float, float]
    qb: Tuple[float, float]
    angle: Optional[float]


def _same_crossing(a: NodeCandidate, b: NodeCandidate, involutions, tol: float) -> bool:
    """Close in the image and carried by the same unordered pair of joint points."""
    if math.hypot(a.location[0] - b.location[0], a.location[1] - b.location[1]) > tol:
        return False
    for mapping in [None] + list(involutions):
        qa, qb = (b.qa, b.qb) if mapping is None else (mapping(*b.qa), mapping(*b.qb))
        if _torus_distance(a.qa, qa) < tol and _torus_distance(a.qb, qb) < tol:
            return True
        if _torus_distance(a.qa, qb) < tol and _torus_distance(a.qb, qa) < tol:
            return True
    return False


def cluster_node_candidates(candidates: Sequence[NodeCandidate], involutions, tol: float) -> List[List[NodeCandidate]]:
    """Group candidates into crossings, chaining through shared neighbours."""
    if not candidates:
        return []
    n = len(candidates)
    linked = np.zeros((n, n), dtype=bool)
    for i, j in itertools.combinations(range(n), 2):
        linked[i, j] = _same_crossing(candidates[i], candidates[j], involutions, tol)
    count, labels = csgraph.connected_components(sparse.csr_matrix(linked), directed=False)
    return [[candidates[k] for k in np.nonzero(labels == label)[0]] for label in range(count)]


def _node_point(geom: ManipulatorGeometry, candidate: NodeCandidate, settings: AnalysisSettings) -> CriticalPoint:
    L = geom.L
    rho, z = candidate.location
    qa, qb = normalize_angle(np.array(candidate.qa)), normalize_angle(np.array(candidate.qb))
    point = CriticalPoint(NODE, CrossSectionPoint(float(rho) * L, float(z) * L),
                          [(float(qa[0]), float(qa[1])), (float(qb[0]), float(qb[1]))],
                          on_axis=float(rho) < settings.node_axis_eps)
    if candidate.angle is not None and candidate.angle < settings.tangent_angle_eps:
        point.annotations.append(TRANSITION_DEGENERATE)
    point.residuals = certify_critical_point(geom, point)
    point.discriminant_dP = node_dp_discriminant(geom, point)
    return point


def resolve_crossing(geom: ManipulatorGeometry, cluster: Sequence[NodeCandidate], settings: AnalysisSettings):
    """
    Certify every member and keep the best one.

    Returns (node, None) when it certifies, (None, point) for an uncertified
    near-tangent contact and (None, None) otherwise.
    """
    points = [_node_point(geom, candidate, settings) for candidate in cluster]
    best = min(points, key=lambda p: max(abs(r) for r in p.residuals))
    if max(abs(r) for r in best.residuals) <= settings.cert_eps:
        return best, None
    failure = CertificationFailure(NODE, (best.location.rho, best.location.z), best.residuals)
    if any(TRANSITION_DEGENERATE in p.annotations for p in points):
        logger.info(f"{failure}; reported as a transition point")
        if TRANSITION_DEGENERATE not in best.annotations:
            best.annotations.append(TRANSITION_DEGENERATE)
        best.annotations.append('uncertified')
        return None, best
    logger.warning(str(failure))
    return None, None


def _merge(points: List[CriticalPoint], point: CriticalPoint, L: float) -> None:
    for existing in points:
        if math.hypot(existing.location.rho - point.location.rho,
                      existing.location.z - point.location.z) < REFINED_MERGE_TOL * L:
            return
    points.append(point)


def node_candidates(geom: ManipulatorGeometry, planar_curves: Sequence[PlanarCurve],
                    settings: AnalysisSettings = DEFAULT_SETTINGS, grid_n: Optional[int] = None) -> List[NodeCandidate]:
    """Refined image crossings and collapsed curves lying on other curves, uncertified."""
    L = geom.L
    unit = geom.normalized()
    pitch = 2.0 * math.pi / (grid_n or settings.grid_n)
    involutions = image_involutions(geom, settings.zero_eps)

    candidates: List[NodeCandidate] = []
    for ia, qa, ib, qb, location in _intersection_candidates(planar_curves, L, pitch, involutions):
        factor_a = planar_curves[ia].preimage.factor
        factor_b = planar_curves[ib].preimage.factor
        x, residual = _refine_node(unit, factor_a, qa, factor_b, qb)
        ra, rb = (x[0], x[1]), (x[2], x[3])
        if residual < 1e-11 and _torus_distance(ra, rb) > pitch \
                and not _is_symmetric_pair(involutions, ra, rb, pitch):
            rho, z = cross_section_arrays(unit, x[0], x[1])
            if math.hypot(rho - location[0], z - location[1]) > 0.05:
                continue
            qa, qb, location = ra, rb, (float(rho), float(z))
        angle = _crossing_angle(unit, factor_a, qa, factor_b, qb)
        candidates.append(NodeCandidate((float(location[0]), float(location[1])),
                                        tuple(normalize_angle(np.array(qa))),
                                        tuple(normalize_angle(np.array(qb))), angle))

    for curve in planar_curves:
        if not curve.degenerate_to_point:
            continue
        target = curve.vertices.mean(axis=0) / L
        for other in planar_curves:
            if other is curve or other.degenerate_to_point:
                continue
            preimage = _point_on_curve(unit, other, target, L)
            if preimage is None:
                continue
            own = curve.preimage.vertices
            distances = np.hypot(angle_distance(own[:, 0], preimage[0]), angle_distance(own[:, 1], preimage[1]))
            if distances.min() < SAME_POINT_PITCHES * pitch:
                continue
            qa = tuple(float(v) for v in own[int(np.argmin(distances))])
            candidates.append(NodeCandidate((float(target[0]), float(target[1])), qa, tuple(preimage), None))
    return candidates


def detect_nodes(geom: ManipulatorGeometry, planar_curves: Optional[Sequence[PlanarCurve]] = None,
                 settings: AnalysisSettings = DEFAULT_SETTINGS, grid_n: Optional[int] = None,
                 transition_points: Optional[List[CriticalPoint]] = None) -> List[CriticalPoint]:
    """
    Nodes: transversal (self-)intersections of singular images whose two
    preimages are distinct joint configurations, plus collapsed curves whose
    point image lies on another singular curve away from a joint-space
    crossing. Every node is certified as two double roots.

    Candidates are first grouped into crossings (same image neighbourhood,
    same pair of joint points) and each crossing is certified once. A
    near-tangent contact that does not certify is not a node; it is
    appended to transition_points when that list is given.
    """
    L = geom.L
    if planar_curves is None:
        torus = joint_space_singular_curves(geom, settings.grid_n, settings.sing_eps)
        planar_curves = workspace_singular_image(geom, torus, settings.point_eps)
    pitch = 2.0 * math.pi / (grid_n or settings.grid_n)
    involutions = image_involutions(geom, settings.zero_eps)

    candidates = node_candidates(geom, planar_curves, settings, grid_n)
    clusters = cluster_node_candidates(candidates, involutions, CLUSTER_PITCHES * pitch)
    nodes: List[CriticalPoint] = []
    transitions: List[CriticalPoint] = []
    for cluster in clusters:
        node, transition = resolve_crossing(geom, cluster, settings)
        if node is not None:
            _merge(nodes, node, L)
        elif transition is not None:
            _merge(transitions, transition, L)

    nodes.sort(key=lambda p: (p.location.rho, p.location.z))
    transitions.sort(key=lambda p: (p.location.rho, p.location.z))
    if transition_points is not None:
        transition_points.extend(transitions)
    logger.debug(f"Detected {len(nodes)} node(s), {sum(p.on_axis for p in nodes)} on the axis, "
                 f"from {len(candidates)} candidate(s) in {len(clusters)} crossing(s)")
    return nodes


def isolated_points(geom: ManipulatorGeometry, planar_curves: Sequence[PlanarCurve],
                    settings: AnalysisSettings = DEFAULT_SETTINGS) -> List[CriticalPoint]:
    """Collapsed singular curves whose point image lies on no other singular curve."""
    L = geom.L
    unit = geom.normalized()
    points: List[CriticalPoint] = []
    for curve in planar_curves:
        if not curve.degenerate_to_point:
            continue
        target = curve.vertices.mean(axis=0) / L
        if any(_point_on_curve(unit, other, target, L) is not None
               for other in planar_curves if other is not curve and not other.degenerate_to_point):
            continue
        span = curve.vertices.max(axis=0) - curve.vertices.min(axis=0)
        vertex = curve.preimage.vertices[0]
        point = CriticalPoint(ISOLATED, CrossSectionPoint(float(target[0] * L), float(target[1] * L)),
                              [(float(vertex[0]), float(vertex[1]))],
                              residuals=(float(np.hypot(*span) / L),),
                              on_axis=float(target[0]) < settings.node_axis_eps)
        _merge(points, point, L)
    points.sort(key=lambda p: (p.location.rho, p.location.z))
    return points


@dataclass
class SingularSet:
    """Everything the singularity analysis produces for one geometry."""

    torus_curves: List[TorusCurve]
    planar_curves: List[PlanarCurve]
    cusps: List[CriticalPoint]
    nodes: List[CriticalPoint]
    isolated: List[CriticalPoint]
    grid_n: int
    warnings: List[str] = field(default_factory=list)
    # uncertified near-tangent contacts; never counted as nodes
    transition_points: List[CriticalPoint] = field(default_factory=list)

    @property
    def critical_points(self) -> List[CriticalPoint]:
        return sorted(self.cusps + self.nodes + self.isolated,
                      key=lambda p: (p.kind, p.location.rho, p.location.z))

    def max_det_residual(self, geom: ManipulatorGeometry) -> float:
        """Largest |det J| / L^3 over all refined vertices."""
        unit = geom.normalized()
        worst = 0.0
        for curve in self.torus_curves:
            values = jacobian_det(unit, curve.vertices[:, 0], curve.vertices[:, 1])
            worst = max(worst, float(np.max(np.abs(values))))
        return worst


def analyze_singularities(geom: ManipulatorGeometry,
                          settings: AnalysisSettings = DEFAULT_SETTINGS) -> SingularSet:
    warnings: List[str] = []
    torus = joint_space_singular_curves(geom, settings.grid_n, settings.sing_eps, warnings)
    grid_n = settings.grid_n * (2 if warnings else 1)
    planar = workspace_singular_image(geom, torus, settings.point_eps)
    cusps = detect_cusps(geom, planar, settings)
    transitions: List[CriticalPoint] = []
    nodes = detect_nodes(geom, planar, settings, grid_n=grid_n, transition_points=transitions)
    isolated = isolated_points(geom, planar, settings)
    for node in nodes:
        if TRANSITION_DEGENERATE in node.annotations:
            warnings.append(f"Near-tangent singular curves at rho={node.location.rho:.6g}, "
                            f"z={node.location.z:.6g} (transition-degenerate)")
    for point in transitions:
        warnings.append(f"Uncertified near-tangent contact at rho={point.location.rho:.6g}, "
                        f"z={point.location.z:.6g}; not counted as a node")
    logger.info(f"Singularity analysis: {len(torus)} curve(s), {len(cusps)} cusp(s), "
                f"{len(nodes)} node(s), {len(isolated)} isolated point(s)")
    return SingularSet(torus, planar, cusps, nodes, isolated, grid_n, warnings, transitions)
