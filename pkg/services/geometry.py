"""
Manipulator model for 3R orthogonal positioning arms.

The end point in frame 1 (theta1 = 0) is

    px = d2 + c2*F + r3*s2
    py = d4*s3 + r2
    pz = r3*c2 - F*s2,      with F = d3 + d4*c3,

and the base-frame point is that vector rotated by theta1 about z.
Every function accepting angles is numpy-vectorized unless it returns one
of the small value types below.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional

import numpy as np

from services.errors import (
    DegenerateGeometryError,
    GeometryFileError,
    NegativeParameterError,
    NonFiniteParameterError,
    NonPositiveD4Error,
)

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ('d2', 'd3', 'r2', 'r3', 'd4')
TWO_PI = 2.0 * math.pi


def normalize_angle(angle):
    """Wrap an angle (or array of angles) into [-pi, pi)."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + math.pi, TWO_PI) - math.pi
    # mod can round up to exactly 2*pi for tiny negative inputs
    wrapped = np.where(wrapped >= math.pi, wrapped - TWO_PI, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def angle_distance(a, b):
    """Absolute angular difference, accounting for wraparound."""
    return np.abs(normalize_angle(np.asarray(a) - np.asarray(b)))


@dataclass(frozen=True)
class ManipulatorGeometry:
    """The five DH lengths of one orthogonal 3R manipulator."""

    d2: float
    d3: float
    r2: float
    r3: float
    d4: float

    @property
    def L(self) -> float:
        """Characteristic length, an upper bound on the reach."""
        return self.d2 + self.d3 + self.d4 + self.r2 + self.r3

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def scaled(self, factor: float) -> 'ManipulatorGeometry':
        return ManipulatorGeometry(*(factor * getattr(self, n) for n in PARAMETER_NAMES))

    def normalized(self) -> 'ManipulatorGeometry':
        """Same shape, scaled so that L = 1."""
        return self.scaled(1.0 / self.L)

    def zero_pattern(self, eps_zero: float = 1e-12) -> Dict[str, bool]:
        """Which of (d2, r2, d3, r3) count as zero at relative tolerance eps_zero."""
        limit = eps_zero * self.L
        return {name: getattr(self, name) < limit for name in ('d2', 'r2', 'd3', 'r3')}


class JointConfig(NamedTuple):
    theta1: float
    theta2: float
    theta3: float

    def normalized(self) -> 'JointConfig':
        return JointConfig(*(normalize_angle(a) for a in self))


class CartesianPoint(NamedTuple):
    x: float
    y: float
    z: float


class CrossSectionPoint(NamedTuple):
    rho: float
    z: float


def make_geometry(d2, d3, r2, r3, d4) -> ManipulatorGeometry:
    """
    Validate the five DH lengths and build a geometry.

    Raises:
        NonFiniteParameterError, NegativeParameterError, NonPositiveD4Error,
        DegenerateGeometryError
    """
    values = {}
    for name, raw in zip(PARAMETER_NAMES, (d2, d3, r2, r3, d4)):
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise NonFiniteParameterError(f"Parameter {name} is not a number: {raw!r}")
        if not math.isfinite(value):
            raise NonFiniteParameterError(f"Parameter {name} must be finite, got {value}")
        values[name] = value

    if values['d4'] <= 0:
        raise NonPositiveD4Error(f"d4 must be strictly positive, got {values['d4']}")
    for name in ('d2', 'd3', 'r2', 'r3'):
        if values[name] < 0:
            raise NegativeParameterError(f"Parameter {name} must be >= 0, got {values[name]}")
    if values['d2'] == 0 and values['d3'] == 0 and values['r2'] == 0:
        raise DegenerateGeometryError(
            "d2 = d3 = r2 = 0: every configuration lies on the sphere "
            "rho^2 + z^2 = d4^2 + r3^2"
        )
    return ManipulatorGeometry(**values)


def geometry_from_mapping(data: Mapping) -> ManipulatorGeometry:
    """Build a geometry from a flat key/value document, rejecting unknown keys."""
    if not isinstance(data, Mapping):
        raise GeometryFileError("Geometry document must be a key/value object")
    unknown = sorted(set(data) - set(PARAMETER_NAMES))
    if unknown:
        raise GeometryFileError(f"Unknown geometry keys: {', '.join(unknown)}")
    missing = [name for name in PARAMETER_NAMES if name not in data]
    if missing:
        raise GeometryFileError(f"Missing geometry keys: {', '.join(missing)}")
    for name in PARAMETER_NAMES:
        if isinstance(data[name], bool) or not isinstance(data[name], (int, float)):
            raise GeometryFileError(f"Geometry key {name} must be numeric")
    return make_geometry(*(data[name] for name in PARAMETER_NAMES))


# ---------------------------------------------------------------------------
# Kinematic map
# ---------------------------------------------------------------------------

def frame1_position(geom: ManipulatorGeometry, theta2, theta3):
    """End point at theta1 = 0 as (px, py, pz) arrays."""
    c2, s2 = np.cos(theta2), np.sin(theta2)
    c3, s3 = np.cos(theta3), np.sin(theta3)
    F = geom.d3 + geom.d4 * c3
    px = geom.d2 + c2 * F + geom.r3 * s2
    py = geom.d4 * s3 + geom.r2
    pz = geom.r3 * c2 - F * s2
    return px, py, pz


def frame1_derivatives(geom: ManipulatorGeometry, theta2, theta3):
    """Partial derivatives of (px, py, pz) with respect to theta2 and theta3."""
    c2, s2 = np.cos(theta2), np.sin(theta2)
    c3, s3 = np.cos(theta3), np.sin(theta3)
    F = geom.d3 + geom.d4 * c3
    dpx2 = -s2 * F + geom.r3 * c2
    dpx3 = -c2 * geom.d4 * s3
    dpy2 = np.zeros_like(dpx2)
    dpy3 = geom.d4 * c3
    dpz2 = -geom.r3 * s2 - F * c2
    dpz3 = geom.d4 * s3 * s2
    return (dpx2, dpx3), (dpy2, dpy3), (dpz2, dpz3)


def forward_kinematics(geom: ManipulatorGeometry, q: JointConfig) -> CartesianPoint:
    px, py, pz = frame1_position(geom, q.theta2, q.theta3)
    c1, s1 = math.cos(q.theta1), math.sin(q.theta1)
    return CartesianPoint(float(c1 * px - s1 * py), float(s1 * px + c1 * py), float(pz))


def cross_section_arrays(geom: ManipulatorGeometry, theta2, theta3):
    """Vectorized (rho, z) of the kinematic map."""
    px, py, pz = frame1_position(geom, theta2, theta3)
    return np.hypot(px, py), pz


def cross_section_coords(geom: ManipulatorGeometry, theta2, theta3) -> CrossSectionPoint:
    rho, z = cross_section_arrays(geom, theta2, theta3)
    return CrossSectionPoint(float(rho), float(z))


def cross_section_jacobian(geom: ManipulatorGeometry, theta2, theta3):
    """
    Derivatives of (R = rho^2, z) with respect to (theta2, theta3).

    Working with rho^2 keeps the map smooth on the z-axis.

    Returns:
        (dR2, dR3, dz2, dz3) arrays
    """
    px, py, _ = frame1_position(geom, theta2, theta3)
    (dpx2, dpx3), (dpy2, dpy3), (dpz2, dpz3) = frame1_derivatives(geom, theta2, theta3)
    dR2 = 2.0 * (px * dpx2 + py * dpy2)
    dR3 = 2.0 * (px * dpx3 + py * dpy3)
    return dR2, dR3, dpz2, dpz3


# ---------------------------------------------------------------------------
# Jacobian determinant
# ---------------------------------------------------------------------------

def _jacobian_reduced(geom: ManipulatorGeometry, theta2, theta3, r3_sign: float):
    c2, s2 = np.cos(theta2), np.sin(theta2)
    c3, s3 = np.cos(theta3), np.sin(theta3)
    F = geom.d3 + geom.d4 * c3
    return F * ((geom.d2 + geom.r3 * s2) * s3 + (geom.d3 * s3 - geom.r2 * c3) * c2) \
        + r3_sign * geom.r3 * (geom.r2 + geom.d4 * s3) * s2 * c3


def jacobian_det(geom: ManipulatorGeometry, theta2, theta3):
    """
    Determinant of the positional Jacobian (length^3), independent of theta1.

    det = d4 * { F [(d2 + r3 s2) s3 + (d3 s3 - r2 c3) c2] - r3 (r2 + d4 s3) s2 c3 }

    For r3 = 0 this factors as d4 * F * [d2 s3 + (d3 s3 - r2 c3) c2].
    """
    value = geom.d4 * _jacobian_reduced(geom, theta2, theta3, -1.0)
    if np.ndim(value) == 0:
        return float(value)
    return value


def jacobian_det_as_printed(geom: ManipulatorGeometry, theta2, theta3):
    """
    Same closed form with a plus sign on the r3 term, as it is usually quoted.

    It agrees with jacobian_det whenever r3 = 0 but does not vanish on the
    sphere arm d2 = d3 = r2 = 0, so it is kept for reference only.
    """
    value = geom.d4 * _jacobian_reduced(geom, theta2, theta3, +1.0)
    if np.ndim(value) == 0:
        return float(value)
    return value


def numeric_jacobian_det(geom: ManipulatorGeometry, q: JointConfig, step: float = 1e-5) -> float:
    """Central-difference determinant of the 3x3 positional Jacobian."""
    if step <= 0:
        raise ValueError(f"Finite-difference step must be positive, got {step}")
    columns = []
    for index in range(3):
        plus = list(q)
        minus = list(q)
        plus[index] += step
        minus[index] -= step
        p_plus = np.array(forward_kinematics(geom, JointConfig(*plus)))
        p_minus = np.array(forward_kinematics(geom, JointConfig(*minus)))
        columns.append((p_plus - p_minus) / (2.0 * step))
    return float(np.linalg.det(np.column_stack(columns)))


@dataclass(frozen=True)
class JacobianFactor:
    """One elementary factor of the determinant, traced on its own."""

    name: str
    func: Callable

    def __call__(self, theta2, theta3):
        return self.func(theta2, theta3)


def jacobian_factors(geom: ManipulatorGeometry, eps_zero: float = 1e-12) -> List[JacobianFactor]:
    """
    Split the determinant into factors whose zero sets are traced separately.

    The product of the returned factors equals det / d4 up to a nonzero
    constant. Keeping factors apart means two sheets of the singular set
    that cross on the torus stay two curves.
    """
    zero = geom.zero_pattern(eps_zero)
    d2, d3, r2, r3, d4 = geom.d2, geom.d3, geom.r2, geom.r3, geom.d4

    def F(t2, t3):
        return d3 + d4 * np.cos(t3)

    def U(t2, t3):
        return np.cos(t2) * F(t2, t3) + r3 * np.sin(t2)

    def cos2(t2, t3):
        return np.cos(t2) + 0.0 * t3

    def sin3(t2, t3):
        return np.sin(t3) + 0.0 * t2

    def cos3(t2, t3):
        return np.cos(t3) + 0.0 * t2

    factors: List[JacobianFactor] = []
    if zero['r3']:
        factors.append(JacobianFactor('c3', cos3) if zero['d3'] else JacobianFactor('F', F))
        if zero['d2']:
            factors.append(JacobianFactor('c2', cos2))
            if not zero['d3']:
                factors.append(JacobianFactor(
                    'd3*s3-r2*c3', lambda t2, t3: d3 * np.sin(t3) - r2 * np.cos(t3) + 0.0 * t2))
            # d3 = 0 leaves -r2*c3, already covered by the c3 factor
        elif zero['r2']:
            factors.append(JacobianFactor('s3', sin3))
            if not zero['d3']:
                factors.append(JacobianFactor(
                    'd2+d3*c2', lambda t2, t3: d2 + d3 * np.cos(t2) + 0.0 * t3))
        else:
            factors.append(JacobianFactor(
                'Q', lambda t2, t3: d2 * np.sin(t3)
                + np.cos(t2) * (d3 * np.sin(t3) - r2 * np.cos(t3))))
        return factors

    if zero['r2']:
        factors.append(JacobianFactor('s3', sin3))
        if zero['d2']:
            factors.append(JacobianFactor('U', U))
        elif zero['d3']:
            factors.append(JacobianFactor('c3', cos3))
        else:
            factors.append(JacobianFactor(
                'd2*F+d3*U', lambda t2, t3: d2 * F(t2, t3) + d3 * U(t2, t3)))
        return factors

    if zero['d3']:
        factors.append(JacobianFactor('c3', cos3))
        if zero['d2']:
            factors.append(JacobianFactor('U', U))
        else:
            factors.append(JacobianFactor(
                'c3-cofactor',
                lambda t2, t3: d4 * d2 * np.sin(t3) - d4 * r2 * np.cos(t3) * np.cos(t2)
                - r2 * r3 * np.sin(t2)))
        return factors

    factors.append(JacobianFactor(
        'det/d4', lambda t2, t3: _jacobian_reduced(geom, t2, t3, -1.0)))
    return factors


def image_involutions(geom: ManipulatorGeometry, eps_zero: float = 1e-12) -> List[Callable]:
    """
    Every non-trivial map of the joint torus, built from the elementary
    symmetries and their compositions, that leaves (rho, z) unchanged.
    """
    zero = geom.zero_pattern(eps_zero)
    basic: List[Callable] = []
    if zero['d2']:
        def reflect_theta2(t2, t3):
            F = geom.d3 + geom.d4 * np.cos(t3)
            return normalize_angle(2.0 * np.arctan2(-F, geom.r3) - t2), normalize_angle(t3)
        basic.append(reflect_theta2)
    if zero['r2']:
        basic.append(lambda t2, t3: (normalize_angle(t2), normalize_angle(-np.asarray(t3))))
    if zero['d3'] and zero['r3']:
        basic.append(lambda t2, t3: (normalize_angle(np.asarray(t2) + math.pi),
                                     normalize_angle(math.pi - np.asarray(t3))))

    maps = list(basic)
    for first_index, first in enumerate(basic):
        for second in basic[first_index + 1:]:
            maps.append(lambda t2, t3, f=first, g=second: g(*f(t2, t3)))
    if len(basic) == 3:
        maps.append(lambda t2, t3: basic[2](*basic[1](*basic[0](t2, t3))))
    return maps


def image_involution(geom: ManipulatorGeometry, eps_zero: float = 1e-12) -> Optional[Callable]:
    """
    A map of the joint torus that leaves (rho, z) unchanged, if one exists.

    Such a map pairs up inverse solutions, which is why the inverse problem
    of every zero-parameter family reduces to a quadratic.

    Returns:
        Callable (theta2, theta3) -> (theta2', theta3'), or None
    """
    maps = image_involutions(geom, eps_zero)
    return maps[0] if maps else None


def recover_theta2(geom: ManipulatorGeometry, theta3, U, z):
    """
    Solve F*c2 + r3*s2 = U, r3*c2 - F*s2 = z for theta2.

    Returns NaN where F^2 + r3^2 vanishes.
    """
    F = geom.d3 + geom.d4 * np.cos(theta3)
    denom = F * F + geom.r3 * geom.r3
    with np.errstate(invalid='ignore', divide='ignore'):
        c2 = (F * U + geom.r3 * z) / denom
        s2 = (geom.r3 * U - F * z) / denom
    return np.arctan2(s2, c2)


def mirror_theta2(geom: ManipulatorGeometry, theta2, theta3):
    """theta2' such that (theta2', theta3) images to (rho, -z)."""
    px, _, pz = frame1_position(geom, theta2, theta3)
    return normalize_angle(recover_theta2(geom, theta3, px - geom.d2, -pz))
