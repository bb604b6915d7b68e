"""
Brute-force validators that do not rely on the inverse-kinematics algebra.

The torus is sampled on a regular grid; cells whose corner values of
(rho^2, z) bracket the target seed a damped Newton iteration on
(rho^2 - rho_t^2, z - z_t). Distinct converged roots are counted.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import optimize

from services.geometry import (
    ManipulatorGeometry,
    cross_section_jacobian,
    frame1_position,
    normalize_angle,
)

logger = logging.getLogger(__name__)

MAX_NEWTON_STEP = 0.5


@dataclass(frozen=True)
class OracleConfig:
    grid_n: int = 1024
    refine_iters: int = 30
    dedupe_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.grid_n < 256:
            raise ValueError(f"Oracle grid_n must be >= 256, got {self.grid_n}")
        if self.dedupe_tol <= 0:
            raise ValueError("Oracle dedupe_tol must be positive")

    @classmethod
    def from_settings(cls, settings) -> 'OracleConfig':
        return cls(settings.oracle_grid_n, settings.oracle_refine_iters,
                   settings.oracle_dedupe_tol, settings.seed)


@lru_cache(maxsize=4)
def _torus_samples(geom: ManipulatorGeometry, grid_n: int):
    """Grid angles with the (R, z) values at every node (cached per geometry)."""
    theta = -math.pi + 2.0 * math.pi * (np.arange(grid_n) + 0.5) / grid_n
    T2, T3 = np.meshgrid(theta, theta, indexing='ij')
    px, py, pz = frame1_position(geom, T2, T3)
    return theta, px * px + py * py, pz


class BruteForceOracle:
    """Inverse-solution counter for one geometry."""

    def __init__(self, geom: ManipulatorGeometry, cfg: OracleConfig = OracleConfig()):
        self.geom = geom
        self.cfg = cfg

    def _bracketing_seeds(self, grid_n: int, R_t: float, z_t: float):
        theta, R, Z = _torus_samples(self.geom, grid_n)
        corners_R = np.stack([R, np.roll(R, -1, 0), np.roll(np.roll(R, -1, 0), -1, 1), np.roll(R, -1, 1)])
        corners_Z = np.stack([Z, np.roll(Z, -1, 0), np.roll(np.roll(Z, -1, 0), -1, 1), np.roll(Z, -1, 1)])
        mask = (corners_R.min(0) <= R_t) & (corners_R.max(0) >= R_t) \
            & (corners_Z.min(0) <= z_t) & (corners_Z.max(0) >= z_t)
        i, j = np.nonzero(mask)
        pitch = 2.0 * math.pi / grid_n
        return theta[i] + 0.5 * pitch, theta[j] + 0.5 * pitch, pitch

    def _newton(self, t2, t3, R_t, z_t):
        L = self.geom.L
        for _ in range(self.cfg.refine_iters):
            px, py, pz = frame1_position(self.geom, t2, t3)
            f1 = px * px + py * py - R_t
            f2 = pz - z_t
            dR2, dR3, dz2, dz3 = cross_section_jacobian(self.geom, t2, t3)
            det = dR2 * dz3 - dR3 * dz2
            safe = np.abs(det) > 1e-300
            det = np.where(safe, det, 1.0)
            step2 = np.where(safe, -(dz3 * f1 - dR3 * f2) / det, 0.0)
            step3 = np.where(safe, -(-dz2 * f1 + dR2 * f2) / det, 0.0)
            size = np.hypot(step2, step3)
            damping = np.where(size > MAX_NEWTON_STEP, MAX_NEWTON_STEP / np.maximum(size, 1e-300), 1.0)
            t2 = t2 + damping * step2
            t3 = t3 + damping * step3
        px, py, pz = frame1_position(self.geom, t2, t3)
        converged = (np.abs(px * px + py * py - R_t) < 1e-9 * L * L) & (np.abs(pz - z_t) < 1e-9 * L)
        return normalize_angle(t2), normalize_angle(t3), converged

    def _distinct(self, t2, t3):
        roots = []
        for a, b in sorted(zip(np.atleast_1d(t2).tolist(), np.atleast_1d(t3).tolist())):
            if not any(abs(normalize_angle(a - c)) < self.cfg.dedupe_tol
                       and abs(normalize_angle(b - d)) < self.cfg.dedupe_tol for c, d in roots):
                roots.append((a, b))
        return roots

    def roots(self, rho: float, z: float, grid_n: int = None, allow_refine: bool = True):
        """Distinct (theta2, theta3) roots reaching (rho, z)."""
        if rho < 0:
            raise ValueError(f"rho must be >= 0, got {rho}")
        grid_n = grid_n or self.cfg.grid_n
        R_t = rho * rho
        s2, s3, pitch = self._bracketing_seeds(grid_n, R_t, z)
        if s2.size == 0:
            return []
        t2, t3, converged = self._newton(s2, s3, R_t, z)
        roots = self._distinct(t2[converged], t3[converged])

        failed = ~converged
        if allow_refine and failed.any():
            # a failed seed is only a problem if no root sits in its cell
            half = 0.5 * pitch + 1e-12
            for a, b in zip(s2[failed], s3[failed]):
                if not any(abs(normalize_angle(a - c)) <= half and abs(normalize_angle(b - d)) <= half
                           for c, d in roots):
                    logger.warning(
                        f"ConvergenceWarning: oracle cell near ({a:.4f}, {b:.4f}) did not converge "
                        f"for target rho={rho:.6g}, z={z:.6g}; doubling grid to {2 * grid_n}")
                    return self.roots(rho, z, grid_n=2 * grid_n, allow_refine=False)
        return roots

    def count(self, rho: float, z: float, grid_n: int = None) -> int:
        return len(self.roots(rho, z, grid_n=grid_n))


def brute_force_count(geom: ManipulatorGeometry, rho: float, z: float,
                      cfg: OracleConfig = OracleConfig()) -> int:
    """Count distinct inverse solutions by exhaustive torus search."""
    return BruteForceOracle(geom, cfg).count(rho, z)


def reach_bounds(geom: ManipulatorGeometry, grid_n: int = 256) -> Tuple[float, float]:
    """
    Smallest and largest distance of the end point from the base origin.

    A grid scan seeds a bounded local refinement; the maximum is clipped to L.
    """
    theta = -math.pi + 2.0 * math.pi * (np.arange(grid_n) + 0.5) / grid_n
    T2, T3 = np.meshgrid(theta, theta, indexing='ij')
    px, py, pz = frame1_position(geom, T2, T3)
    dist = np.sqrt(px * px + py * py + pz * pz)

    def norm_at(q, sign):
        x, y, zz = frame1_position(geom, q[0], q[1])
        return sign * math.sqrt(float(x * x + y * y + zz * zz))

    extremes = []
    for sign, index in ((1.0, np.argmin(dist)), (-1.0, np.argmax(dist))):
        i, j = np.unravel_index(index, dist.shape)
        start = np.array([theta[i], theta[j]])
        found = optimize.minimize(norm_at, start, args=(sign,), method='Nelder-Mead',
                                  options={'xatol': 1e-12, 'fatol': 1e-14, 'maxiter': 2000})
        best = sign * found.fun if found.success else sign * norm_at(start, sign)
        grid_value = float(dist[i, j])
        extremes.append(min(best, grid_value) if sign > 0 else max(best, grid_value))
    min_extent = max(0.0, extremes[0])
    max_extent = min(geom.L, extremes[1])
    return min_extent, max_extent
