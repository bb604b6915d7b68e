# filepath: services/validator.py
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.spatial import cKDTree

from config import DEFAULT_SETTINGS, AnalysisSettings
from services.classifier import WELL_CONNECTED_TYPES, classify
from services.geometry import (
    JointConfig,
    ManipulatorGeometry,
    jacobian_det,
    numeric_jacobian_det,
)
from services.ik_solver import count_ik
from services.oracle import BruteForceOracle, OracleConfig, reach_bounds
from services.topology import analyze_workspace

SCALE_FACTORS = (0.1, 10.0)
DET_PROBES = 100
DET_SPREAD_TOL = 1e-5
DET_ZERO_TOL = 1e-6
# targets closer than this fraction of L to a singular image are skipped
CURVE_CLEARANCE = 0.01
MIRROR_TOL = 1e-6


@dataclass
class PropertyResult:
    name: str
    passed: bool
    details: Dict = field(default_factory=dict)
    failing_probe: Optional[Dict] = None

    def to_dict(self) -> Dict:
        data = {'name': self.name, 'passed': self.passed, 'details': self.details}
        if self.failing_probe is not None:
            data['failing_probe'] = self.failing_probe
        return data


@dataclass
class ValidationReport:
    geometry: Dict[str, float]
    type_label: Optional[str]
    seed: int
    samples: int
    results: List[PropertyResult]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self) -> Dict:
        return {
            'geometry': self.geometry,
            'type_label': self.type_label,
            'seed': self.seed,
            'samples': self.samples,
            'ok': self.ok,
            'results': [r.to_dict() for r in self.results],
        }


class WorkspaceValidator:
    """
    Property suites behind the validate command. Every suite is seeded and
    reports the first failing probe so a failure can be reproduced.
    """

    def __init__(self, geom: ManipulatorGeometry, settings: AnalysisSettings = DEFAULT_SETTINGS,
                 samples: int = 200, seed: int = 0):
        self.logger = logging.getLogger(__name__)
        self.geom = geom
        self.settings = settings
        self.samples = samples
        self.seed = seed
        self.analysis = analyze_workspace(geom, settings)

    def _rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def _curve_tree(self) -> Optional[cKDTree]:
        curves = [c.vertices for c in self.analysis.singular.planar_curves if len(c.vertices)]
        if not curves:
            return None
        return cKDTree(np.vstack(curves))

    def _targets(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Random (rho, z) targets inside the reach box, clear of singular images."""
        _, max_extent = reach_bounds(self.geom)
        tree = self._curve_tree()
        clearance = CURVE_CLEARANCE * self.geom.L
        targets = []
        attempts = 0
        while len(targets) < count and attempts < 50 * count:
            attempts += 1
            point = np.array([rng.uniform(0.0, max_extent), rng.uniform(-max_extent, max_extent)])
            if tree is not None and tree.query(point)[0] < clearance:
                continue
            targets.append(point)
        return np.array(targets).reshape(-1, 2)

    def oracle_agreement(self) -> PropertyResult:
        """count_ik against the brute-force oracle; mismatches are re-probed at twice the grid."""
        oracle_cfg = OracleConfig.from_settings(self.settings)
        oracle = BruteForceOracle(self.geom, oracle_cfg)
        targets = self._targets(self._rng(1), self.samples)
        first_pass = 0
        failing = None
        for rho, z in targets:
            analytic = count_ik(self.geom, float(rho), float(z), tol=self.settings.ik_tol)
            brute = oracle.count(float(rho), float(z))
            if analytic == brute:
                first_pass += 1
                continue
            brute = oracle.count(float(rho), float(z), grid_n=2 * oracle_cfg.grid_n)
            if analytic != brute and failing is None:
                failing = {'rho': float(rho), 'z': float(z), 'count_ik': analytic, 'oracle': brute}
        total = len(targets)
        rate = first_pass / total if total else 1.0
        return PropertyResult('oracle_agreement', failing is None,
                              {'probes': total, 'first_pass_agreement': rate}, failing)

    def mirror_symmetry(self) -> PropertyResult:
        """Cusp and node sets, and region counts, are symmetric under z -> -z."""
        tol = MIRROR_TOL * self.geom.L
        singular = self.analysis.singular
        for kind, points in (('cusp', singular.cusps), ('node', singular.nodes)):
            for p in points:
                if not any(abs(q.location.rho - p.location.rho) < tol
                           and abs(q.location.z + p.location.z) < tol for q in points):
                    return PropertyResult('mirror_symmetry', False, {'kind': kind},
                                          {'rho': p.location.rho, 'z': p.location.z})
        for region in self.analysis.topology.regions:
            for sample in region.sample_points:
                mirrored = count_ik(self.geom, sample.rho, -sample.z, tol=self.settings.ik_tol)
                if mirrored != region.ik_count:
                    return PropertyResult('mirror_symmetry', False, {'region': region.id},
                                          {'rho': sample.rho, 'z': -sample.z, 'count': mirrored,
                                           'expected': region.ik_count})
        return PropertyResult('mirror_symmetry', True,
                              {'cusps': len(singular.cusps), 'nodes': len(singular.nodes)})

    def scale_invariance(self) -> PropertyResult:
        base_label = classify(self.geom, self.settings, computed=self.analysis.topology).type_label
        base = self.analysis.topology.signature()
        for factor in SCALE_FACTORS:
            scaled = self.geom.scaled(factor)
            signature = analyze_workspace(scaled, self.settings).topology.signature()
            label = classify(scaled, self.settings, analyze=False).type_label
            if signature != base or label != base_label:
                return PropertyResult('scale_invariance', False, {'factor': factor},
                                      {'signature': list(map(str, signature)), 'expected': list(map(str, base)),
                                       'label': label, 'expected_label': base_label})
        return PropertyResult('scale_invariance', True, {'factors': list(SCALE_FACTORS)})

    def determinant_proportionality(self) -> PropertyResult:
        """Finite-difference determinant equals the closed form, and both vanish on traced curves."""
        rng = self._rng(2)
        L3 = self.geom.L ** 3
        ratios = []
        for _ in range(DET_PROBES):
            q = JointConfig(*rng.uniform(-math.pi, math.pi, 3))
            closed = jacobian_det(self.geom, q.theta2, q.theta3)
            if abs(closed) < 1e-3 * L3:
                continue
            ratios.append(numeric_jacobian_det(self.geom, q, self.settings.fd_step) / closed)
        ratios = np.array(ratios)
        spread = float((ratios.max() - ratios.min()) / abs(ratios.mean())) if len(ratios) else 0.0
        if spread >= DET_SPREAD_TOL:
            return PropertyResult('determinant_proportionality', False, {'spread': spread})

        worst = 0.0
        for curve in self.analysis.singular.torus_curves:
            picks = rng.choice(len(curve.vertices), size=min(5, len(curve.vertices)), replace=False)
            for t2, t3 in curve.vertices[picks]:
                value = abs(numeric_jacobian_det(self.geom, JointConfig(0.0, t2, t3),
                                                 self.settings.fd_step)) / L3
                worst = max(worst, value)
        details = {'ratio': float(ratios.mean()) if len(ratios) else None, 'spread': spread,
                   'max_zero_set_residual': worst}
        return PropertyResult('determinant_proportionality', worst < DET_ZERO_TOL, details)

    def region_adjacency(self) -> PropertyResult:
        violations = self.analysis.adjacency_violations()
        details = {'pairs': len(self.analysis.region_map.adjacency),
                   'pinch_contacts': len(self.analysis.region_map.pinch_contacts),
                   'raster_conserved': self.analysis.raster_conserved()}
        failing = {'regions': list(violations[0])} if violations else None
        return PropertyResult('region_adjacency', not violations and details['raster_conserved'],
                              details, failing)

    def _reachable_counts(self, salt: int):
        rng = self._rng(salt)
        counts = []
        for rho, z in self._targets(rng, self.samples):
            count = count_ik(self.geom, float(rho), float(z), tol=self.settings.ik_tol)
            if count > 0:
                counts.append((float(rho), float(z), count))
        return counts

    def binary(self) -> PropertyResult:
        """Binary workspace: no probe reaches more than two solutions."""
        topology = self.analysis.topology
        for rho, z, count in self._reachable_counts(3):
            if count > 2:
                return PropertyResult('binary', False, {'max_ik': topology.max_ik},
                                      {'rho': rho, 'z': z, 'count': count})
        return PropertyResult('binary', topology.max_ik == 2, {'max_ik': topology.max_ik})

    def well_connected(self) -> PropertyResult:
        """The workspace is one 4-solution region: every reachable probe counts 4."""
        topology = self.analysis.topology
        for rho, z, count in self._reachable_counts(4):
            if count != 4:
                return PropertyResult('well_connected', False, {}, {'rho': rho, 'z': z, 'count': count})
        single = topology.well_shaped['single_4region_covers_workspace']
        return PropertyResult('well_connected', single, {'region_counts': topology.region_counts})

    def run(self) -> ValidationReport:
        classification = classify(self.geom, self.settings, computed=self.analysis.topology)
        label = classification.type_label
        suites = [self.oracle_agreement, self.mirror_symmetry, self.scale_invariance,
                  self.determinant_proportionality, self.region_adjacency]
        if label == 'D6':
            suites.append(self.binary)
        if label in WELL_CONNECTED_TYPES:
            suites.append(self.well_connected)

        results = []
        for suite in suites:
            result = suite()
            level = logging.INFO if result.passed else logging.WARNING
            self.logger.log(level, f"{result.name}: {'pass' if result.passed else 'FAIL'} {result.details}")
            results.append(result)
        return ValidationReport(self.geom.as_dict(), label, self.seed, self.samples, results)
