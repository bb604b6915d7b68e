"""
Inverse kinematics for a target point of the half cross-section.

For d2 > 0 the solutions are the real roots of a quartic in t = tan(theta3/2)
whose coefficients only depend on R = rho^2 and Z = z^2. For d2 = 0 the
problem reduces to one trigonometric equation in theta3 followed by a sign
choice for theta2.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from services.errors import DegenerateReducedError, ZeroD2PathError
from services.geometry import (
    CartesianPoint,
    JointConfig,
    ManipulatorGeometry,
    angle_distance,
    forward_kinematics,
    frame1_position,
    normalize_angle,
    recover_theta2,
)

logger = logging.getLogger(__name__)

SIMPLE = 'simple'
DOUBLE_ROOT = 'double-root'
NEAR_SINGULAR = 'near-singular'

ROOT_CLUSTER_TOL = 1e-8
LEADING_COEFF_EPS = 1e-12
# Looser acceptance for the round trip of near-double roots
NEAR_SINGULAR_ROUND_TRIP = 1e-6


@dataclass(frozen=True)
class QuarticPolynomial:
    """P(t) = c0 + c1 t + c2 t^2 + c3 t^3 + c4 t^4 (ascending order)."""

    coefficients: Tuple[float, float, float, float, float]
    target_R: float
    target_Z: float

    @property
    def degree(self) -> int:
        scale = max(abs(c) for c in self.coefficients) or 1.0
        for power in range(4, -1, -1):
            if abs(self.coefficients[power]) > LEADING_COEFF_EPS * scale:
                return power
        return 0

    def __call__(self, t):
        return npoly.polyval(t, self.coefficients)

    def derivative(self, order: int = 1) -> np.ndarray:
        return npoly.polyder(self.coefficients, order)


@dataclass
class IkSolutionSet:
    solutions: List[JointConfig] = field(default_factory=list)
    multiplicity_flags: List[str] = field(default_factory=list)
    on_axis: bool = False
    near_singular: bool = False

    def __len__(self):
        return len(self.solutions)


def quartic_coefficients(geom: ManipulatorGeometry, R, Z) -> np.ndarray:
    """
    Ascending coefficients of P for (possibly array-valued) R and Z.

    P(t) = W(t)^2 + 4 d2^2 (Z - r3^2)(1 + t^2)^2 - 4 d2^2 G(t)^2 with
    W(t) = (K + 2 d3 d4) t^2 - 4 r2 d4 t + (K - 2 d3 d4),
    G(t) = (d3 - d4) t^2 + (d3 + d4),
    K = R + Z - d2^2 - d3^2 - d4^2 - r2^2 - r3^2.
    """
    d2, d3, r2, r3, d4 = geom.d2, geom.d3, geom.r2, geom.r3, geom.d4
    R = np.asarray(R, dtype=float)
    Z = np.asarray(Z, dtype=float)
    K = R + Z - d2 ** 2 - d3 ** 2 - d4 ** 2 - r2 ** 2 - r3 ** 2
    w2 = K + 2.0 * d3 * d4
    w1 = -4.0 * r2 * d4 * np.ones_like(K)
    w0 = K - 2.0 * d3 * d4
    g2 = d3 - d4
    g0 = d3 + d4
    m = 4.0 * d2 ** 2
    zz = Z - r3 ** 2
    c4 = w2 * w2 + m * zz - m * g2 * g2
    c3 = 2.0 * w2 * w1
    c2 = w1 * w1 + 2.0 * w2 * w0 + 2.0 * m * zz - 2.0 * m * g2 * g0
    c1 = 2.0 * w1 * w0
    c0 = w0 * w0 + m * zz - m * g0 * g0
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3, c4), axis=-1)


def ik_polynomial(geom: ManipulatorGeometry, rho: float, z: float) -> QuarticPolynomial:
    """
    Quartic inverse-kinematics polynomial in t = tan(theta3/2).

    Raises:
        ZeroD2PathError: d2 = 0, use solve_theta3_reduced
    """
    if geom.d2 == 0:
        raise ZeroD2PathError("ik_polynomial requires d2 > 0")
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    R = rho * rho
    Z = z * z
    coeffs = quartic_coefficients(geom, R, Z)
    return QuarticPolynomial(tuple(float(c) for c in coeffs), R, Z)


def reduced_coefficients(geom: ManipulatorGeometry, R, Z):
    """(A, B, C) of A*s3 + B*c3 + C = 0 for the d2 = 0 path."""
    A = 2.0 * geom.r2 * geom.d4
    B = 2.0 * geom.d3 * geom.d4
    C = geom.d3 ** 2 + geom.d4 ** 2 + geom.r2 ** 2 + geom.r3 ** 2 - R - Z
    return A, B, C


def solve_theta3_reduced(geom: ManipulatorGeometry, rho: float, z: float) -> List[float]:
    """
    Roots of A*s3 + B*c3 + C = 0 in [-pi, pi), for d2 = 0.

    A tangent root (|C| equal to the amplitude) is returned once.
    """
    if geom.d2 != 0:
        raise ValueError("solve_theta3_reduced requires d2 = 0")
    A, B, C = reduced_coefficients(geom, rho * rho, z * z)
    amplitude = math.hypot(A, B)
    if amplitude == 0:
        raise DegenerateReducedError("A = B = 0: d3 = r2 = 0 with d2 = 0")
    ratio = -C / amplitude
    tol = 1e-12 * max(1.0, abs(C) / amplitude)
    if ratio > 1.0 + tol or ratio < -1.0 - tol:
        return []
    ratio = min(1.0, max(-1.0, ratio))
    phi = math.atan2(A, B)
    spread = math.acos(ratio)
    if spread <= 1e-8:
        return [normalize_angle(phi)]
    return sorted(normalize_angle(phi + sign * spread) for sign in (-1.0, 1.0))


def _polish_root(coeffs: np.ndarray, t: float, iterations: int = 6) -> float:
    d1 = npoly.polyder(coeffs)
    for _ in range(iterations):
        slope = npoly.polyval(t, d1)
        if slope == 0:
            break
        step = npoly.polyval(t, coeffs) / slope
        t -= step
        if abs(step) <= 1e-16 * max(1.0, abs(t)):
            break
    return t


def _quartic_theta3_candidates(geom: ManipulatorGeometry, R: float, Z: float):
    """
    Real theta3 candidates with multiplicity flags.

    Roots within ROOT_CLUSTER_TOL (in t) are merged and flagged as double.
    """
    coeffs = quartic_coefficients(geom, R, Z)
    scale = float(np.max(np.abs(coeffs))) or 1.0
    candidates: List[Tuple[float, str]] = []

    trimmed = coeffs.copy()
    if abs(trimmed[4]) < LEADING_COEFF_EPS * scale:
        # t = inf is theta3 = pi; check it directly on the closure constraint
        trimmed[4] = 0.0
        F = geom.d3 - geom.d4
        K = R + Z - geom.d2 ** 2 - geom.d3 ** 2 - geom.d4 ** 2 - geom.r2 ** 2 - geom.r3 ** 2
        U = (K + 2.0 * geom.d3 * geom.d4) / (2.0 * geom.d2)
        closure = U * U + Z - F * F - geom.r3 ** 2
        if abs(closure) <= 1e-9 * geom.L ** 2:
            candidates.append((-math.pi, SIMPLE))

    while len(trimmed) > 1 and trimmed[-1] == 0.0:
        trimmed = trimmed[:-1]
    if len(trimmed) <= 1:
        return candidates

    raw = np.roots(trimmed[::-1])
    real_ts = []
    for root in raw:
        if abs(root.imag) <= 1e-6 * max(1.0, abs(root.real)):
            real_ts.append(_polish_root(trimmed, float(root.real)))
    real_ts.sort()

    clusters: List[List[float]] = []
    for t in real_ts:
        if clusters and abs(t - clusters[-1][-1]) <= ROOT_CLUSTER_TOL * max(1.0, abs(t)):
            clusters[-1].append(t)
        else:
            clusters.append([t])

    d1 = npoly.polyder(trimmed)
    for cluster in clusters:
        t = float(np.mean(cluster))
        if len(cluster) > 1:
            flag = DOUBLE_ROOT
        else:
            slope = abs(npoly.polyval(t, d1)) / scale
            flag = NEAR_SINGULAR if slope < 1e-7 * max(1.0, t * t) ** 1.5 else SIMPLE
        candidates.append((normalize_angle(2.0 * math.atan(t)), flag))
    return candidates


def _reduced_solutions(geom: ManipulatorGeometry, rho: float, z: float):
    solutions: List[Tuple[float, float, str]] = []
    A, B, _ = reduced_coefficients(geom, rho * rho, z * z)
    theta3_roots = solve_theta3_reduced(geom, rho, z)
    double_theta3 = len(theta3_roots) == 1
    Z = z * z
    for theta3 in theta3_roots:
        F = geom.d3 + geom.d4 * math.cos(theta3)
        U2 = F * F + geom.r3 ** 2 - Z
        tol = 1e-12 * geom.L ** 2
        if U2 < -tol:
            continue
        if U2 <= tol:
            branches = [(0.0, DOUBLE_ROOT)]
        else:
            root = math.sqrt(U2)
            branches = [(root, SIMPLE), (-root, SIMPLE)]
        for U, flag in branches:
            if double_theta3:
                flag = DOUBLE_ROOT
            theta2 = float(recover_theta2(geom, theta3, U, z))
            solutions.append((normalize_angle(theta2), theta3, flag))
    return solutions


def solve_ik(geom: ManipulatorGeometry, target: CartesianPoint, tol: float = 1e-9,
             axis_eps: float = 1e-9) -> IkSolutionSet:
    """
    All distinct inverse solutions reaching the target.

    Args:
        geom: manipulator
        target: base-frame point
        tol: round-trip tolerance relative to L

    Returns:
        IkSolutionSet; on_axis is set when rho < axis_eps * L (theta1 is then
        arbitrary and reported as 0), near_singular when any root is multiple.
    """
    L = geom.L
    rho = math.hypot(target.x, target.y)
    z = target.z
    on_axis = rho < axis_eps * L

    if geom.d2 == 0:
        raw = _reduced_solutions(geom, rho, z)
    else:
        raw = []
        for theta3, flag in _quartic_theta3_candidates(geom, rho * rho, z * z):
            F = geom.d3 + geom.d4 * math.cos(theta3)
            if F * F + geom.r3 ** 2 <= 1e-24 * L * L:
                # theta2 is free on this line; any representative reaches the point
                theta2 = 0.0
                flag = NEAR_SINGULAR
            else:
                K = rho * rho + z * z - geom.d2 ** 2 - geom.d3 ** 2 - geom.d4 ** 2 \
                    - geom.r2 ** 2 - geom.r3 ** 2
                U = (K - 2.0 * geom.d3 * geom.d4 * math.cos(theta3)
                     - 2.0 * geom.r2 * geom.d4 * math.sin(theta3)) / (2.0 * geom.d2)
                theta2 = float(recover_theta2(geom, theta3, U, z))
            raw.append((normalize_angle(theta2), theta3, flag))

    result = IkSolutionSet(on_axis=on_axis)
    target_vec = np.array([target.x, target.y, target.z])
    for theta2, theta3, flag in raw:
        if on_axis:
            theta1 = 0.0
        else:
            px, py, _ = frame1_position(geom, theta2, theta3)
            theta1 = normalize_angle(math.atan2(target.y, target.x) - math.atan2(py, px))
        q = JointConfig(theta1, theta2, theta3)
        reached = np.array(forward_kinematics(geom, q))
        if on_axis:
            error = abs(math.hypot(reached[0], reached[1]) - rho) + abs(reached[2] - z)
        else:
            error = float(np.linalg.norm(reached - target_vec))
        limit = tol * L if flag == SIMPLE else NEAR_SINGULAR_ROUND_TRIP * L
        if error > limit:
            logger.debug(f"Dropping IK candidate {q} with round-trip error {error:.3g}")
            continue
        if any(angle_distance(q.theta2, s.theta2) < 1e-7 and angle_distance(q.theta3, s.theta3) < 1e-7
               for s in result.solutions):
            continue
        result.solutions.append(q)
        result.multiplicity_flags.append(flag)

    result.near_singular = any(flag != SIMPLE for flag in result.multiplicity_flags)
    if result.near_singular:
        logger.debug(f"Near-singular target rho={rho:.6g}, z={z:.6g}")
    return result


def count_ik(geom: ManipulatorGeometry, rho: float, z: float, tol: float = 1e-9) -> int:
    """Number of distinct (theta2, theta3) solutions for the target (rho, z)."""
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    return len(solve_ik(geom, CartesianPoint(rho, 0.0, z), tol=tol))


def count_ik_many(geom: ManipulatorGeometry, points, tol: float = 1e-9) -> np.ndarray:
    """count_ik over an (N, 2) array of (rho, z) points."""
    return np.array([count_ik(geom, float(r), float(z), tol=tol) for r, z in points], dtype=int)


def solution_distance(a: JointConfig, b: JointConfig) -> float:
    return float(max(angle_distance(a.theta2, b.theta2), angle_distance(a.theta3, b.theta3)))


def nearest_solution(solutions: List[JointConfig], q: JointConfig) -> Optional[JointConfig]:
    if not solutions:
        return None
    return min(solutions, key=lambda s: solution_distance(s, q))
