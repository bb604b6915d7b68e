"""
Family and type classification of orthogonal 3R geometries.

The family follows from which of (d2, r2, d3, r3) vanish; inside the
families with several types the separating surfaces of the parameter
space decide the type. Table lookups (t-connectivity, well-connectivity)
are published metadata and are never computed.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from config import DEFAULT_SETTINGS, AnalysisSettings
from services.errors import UnknownTypeError
from services.geometry import ManipulatorGeometry

logger = logging.getLogger(__name__)

FAMILIES = ('A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J')
GENERIC_R3ZERO = 'GENERIC_R3ZERO'
GENERIC = 'GENERIC'
OTHER = 'OTHER'
# d4 = d2, d4 = d3 and d3 = d2, told apart by aux['plane']
D_EQUALITIES = 'D_equalities'

# (d2, r2, d3, r3) zero flags -> family
FAMILY_TREE = {
    (True, False, False, True): 'A',
    (True, True, False, True): 'B',
    (True, False, True, True): 'C',
    (False, True, False, True): 'D',
    (False, True, True, True): 'E',
    (True, False, False, False): 'F',
    (True, True, False, False): 'G',
    (True, False, True, False): 'H',
    (False, True, False, False): 'I',
    (False, True, True, False): 'J',
    (False, False, False, True): GENERIC_R3ZERO,
    (False, False, False, False): GENERIC,
}

TYPE_LABELS = ('A1', 'A2', 'A3', 'B1', 'B2', 'C', 'D1', 'D2', 'D3', 'D4', 'D5', 'D6',
               'E', 'F1', 'F2', 'G', 'H', 'I1', 'I2', 'I3', 'I4', 'J')
WELL_CONNECTED_TYPES = frozenset({'B1', 'C', 'E', 'G', 'H'})
POOR_TYPES = frozenset({'A3', 'D1', 'D6', 'I2', 'I3', 'I4'})
TABLE_PROVENANCE = 'published classification table'

BELOW, ON, ABOVE, UNDEFINED = 'below', 'on', 'above', 'undefined'
TRANSITION_STEP = 1e-6


@dataclass(frozen=True)
class Table1Row:
    type_label: str
    conditions: str
    voids: int
    nodes: int
    four_solution_note: str
    t_connected: bool
    well_connected: bool
    annotations: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        return {
            'type': self.type_label,
            'conditions': self.conditions,
            'voids': self.voids,
            'nodes': self.nodes,
            'four_solution_note': self.four_solution_note,
            't_connected': self.t_connected,
            'well_connected': self.well_connected,
            'poor_performance': self.type_label in POOR_TYPES,
            'annotations': list(self.annotations),
            'provenance': TABLE_PROVENANCE,
        }


_ALL = 'All the workspace'
TABLE1: Dict[str, Table1Row] = {row.type_label: row for row in (
    Table1Row('B1', 'd2=0, r2=0, r3=0, d3>d4', 0, 0, _ALL, True, True),
    Table1Row('C', 'd3=0, r3=0', 0, 0, _ALL, True, True,
              ('table row omits d2=0, which the family definition requires',)),
    Table1Row('E', 'd3=0, r2=0, r3=0', 0, 0, _ALL, True, True),
    Table1Row('G', 'd2=0, r2=0', 0, 0, _ALL, True, True),
    Table1Row('H', 'd2=0, d3=0', 0, 0, _ALL, True, True),
    Table1Row('A1', 'd2=0, r3=0, d4<d3', 0, 0, '', True, False),
    Table1Row('D5', 'r2=0, r3=0, d3<d4<d2', 0, 0, '', True, False),
    Table1Row('F1', 'd2=0, d4<sqrt(d3^2+r2^2)', 0, 0, '', True, False),
    Table1Row('D2', 'r2=0, r3=0, d2<d4<d3', 0, 0, '', False, False),
    Table1Row('I1', 'r2=0, d3>d2 and d4>delta', 0, 0, '', False, False),
    Table1Row('B2', 'd2=0, r2=0, r3=0, d3<d4', 0, 1, _ALL, False, False),
    Table1Row('D3', 'r2=0, r3=0, d2<d3<d4', 0, 1, '', False, False),
    Table1Row('A2', 'd2=0, r3=0, d3<d4<sqrt(d3^2+r2^2)', 0, 2, '', True, False),
    Table1Row('D4', 'r2=0, r3=0, d3<d2<d4', 0, 2, '', False, False),
    Table1Row('F2', 'd2=0, d4>sqrt(d3^2+r2^2)', 0, 2, '', False, False),
    Table1Row('A3', 'd2=0, r3=0, d4>sqrt(d3^2+r2^2)', 0, 4, '', True, False),
    Table1Row('D6', 'r2=0, r3=0, d4<d3<d2', 1, 0, 'Null', True, False),
    Table1Row('I3', 'r2=0, d3<d2 and d4>delta', 1, 0, '', True, False),
    Table1Row('J', 'r2=0 and d3=0', 1, 0, _ALL, True, False),
    Table1Row('D1', 'r2=0, r3=0, d4>d2>d3', 1, 2, '', False, False,
              ('table row lists d4>d2>d3; the type definition d4<d2<d3 is used for labelling',)),
    Table1Row('I2', 'r2=0, d3>d2 and d4<delta', 1, 2, '', False, False),
    Table1Row('I4', 'r2=0', 1, 2, '', True, False,
              ('table row marks t-connected, the type description says not t-connected',
               'table row gives no inequality; d3<d2 and d4<delta is used for labelling')),
)}


@dataclass(frozen=True)
class FamilyCase:
    label: str
    zero_pattern: Dict[str, bool] = field(hash=False)

    @property
    def has_types(self) -> bool:
        return self.label in FAMILIES


@dataclass
class SurfaceEvaluation:
    surface: str
    residual: float
    side: str
    aux: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        residual = None if math.isnan(self.residual) else float(self.residual)
        return {'surface': self.surface, 'residual': residual, 'side': self.side,
                'aux': {k: (v if isinstance(v, str) else float(v)) for k, v in self.aux.items()}}


@dataclass
class TypeClassification:
    family: FamilyCase
    type_label: Optional[str]
    table1: Optional[Dict]
    surfaces: List[SurfaceEvaluation]
    computed: Optional[object] = None
    consistent: Optional[bool] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def is_transition(self) -> bool:
        return bool(self.type_label) and self.type_label.startswith('Transition')

    def to_dict(self) -> Dict:
        return {
            'family': self.family.label,
            'zero_pattern': dict(self.family.zero_pattern),
            'type_label': self.type_label,
            'table1': self.table1,
            'surfaces': [s.to_dict() for s in self.surfaces],
            'consistent': self.consistent,
            'warnings': list(self.warnings),
        }


def family_case(geom: ManipulatorGeometry, eps_zero: float = 1e-12) -> FamilyCase:
    zero = geom.zero_pattern(eps_zero)
    key = (zero['d2'], zero['r2'], zero['d3'], zero['r3'])
    label = FAMILY_TREE.get(key, OTHER)
    if label == OTHER:
        logger.warning(f"Zero pattern {zero} is outside the ten families; no type label")
    return FamilyCase(label, zero)


def _side(residual: float, eps: float) -> str:
    if math.isnan(residual):
        return UNDEFINED
    if abs(residual) < eps:
        return ON
    return ABOVE if residual > 0 else BELOW


def _ab(geom: ManipulatorGeometry) -> Dict[str, float]:
    return {'a': math.hypot(geom.d3 + geom.d2, geom.r2), 'b': math.hypot(geom.d3 - geom.d2, geom.r2)}


def case_i_delta(geom: ManipulatorGeometry) -> Optional[float]:
    """d4 on the case-I node surface, or None where it is undefined."""
    gap = geom.d3 ** 2 - geom.d2 ** 2
    if gap == 0:
        return None
    radicand = 1.0 + geom.r3 ** 2 / gap
    if radicand < 0:
        return None
    return geom.d2 * math.sqrt(radicand)


def sigma2_roots(geom: ManipulatorGeometry) -> List[float]:
    """Positive d4 on the general node surface for the other four lengths."""
    d2, d3, r2, r3 = geom.d2, geom.d3, geom.r2, geom.r3
    a = r2 ** 2
    b = (-r2 ** 4 - d3 ** 2 * r2 ** 2 + r3 ** 2 * r2 ** 2 - d2 ** 2 * r2 ** 2
         + d3 ** 2 * r3 ** 2 - d2 ** 2 * r3 ** 2)
    c = (d2 ** 2 * d3 ** 2 * r2 ** 2 - d2 ** 2 * r3 ** 4 + d2 ** 4 * r3 ** 2
         + d2 ** 2 * r2 ** 2 * r3 ** 2 - d2 ** 2 * d3 ** 2 * r3 ** 2)
    if a == 0:
        squares = [-c / b] if b != 0 else []
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            return []
        root = math.sqrt(disc)
        squares = [(-b - root) / (2 * a), (-b + root) / (2 * a)]
    return sorted(math.sqrt(s) for s in squares if s > 0)


def separating_surfaces_r3zero(geom: ManipulatorGeometry) -> Dict[str, float]:
    """The three r3 = 0 node surfaces as d4 values, for any d2."""
    ab = _ab(geom)
    return {'E1': 0.5 * (ab['a'] - ab['b']), 'E2': geom.d3, 'E3': 0.5 * (ab['a'] + ab['b'])}


def evaluate_surfaces(geom: ManipulatorGeometry, case: FamilyCase, eps_trans: float = 1e-9,
                      warnings: Optional[List[str]] = None) -> List[SurfaceEvaluation]:
    """
    Signed, L-normalized residuals of the separating surfaces of a family.

    Families without surfaces return an empty list; the generic families get
    their general surfaces as metadata.
    """
    L = geom.L
    d2, d3, r2, d4 = geom.d2, geom.d3, geom.r2, geom.d4

    def evaluation(name, residual, aux=None):
        return SurfaceEvaluation(name, residual, _side(residual, eps_trans), aux or {})

    label = case.label
    if label == 'A':
        return [evaluation('E2', (d4 - d3) / L),
                evaluation('E3', (d4 - math.hypot(d3, r2)) / L, _ab(geom))]
    if label == 'B':
        return [evaluation('E2', (d4 - d3) / L)]
    if label == 'D':
        return [evaluation(D_EQUALITIES, (d4 - d2) / L, {'plane': 'd4=d2'}),
                evaluation(D_EQUALITIES, (d4 - d3) / L, {'plane': 'd4=d3'}),
                evaluation(D_EQUALITIES, (d3 - d2) / L, {'plane': 'd3=d2'})]
    if label == 'F':
        return [evaluation('Sigma1', (d4 - math.hypot(d3, r2)) / L)]
    if label == 'I':
        delta = case_i_delta(geom)
        if delta is None:
            message = (f"SurfaceUndefined: case-I node surface has no real d4 "
                       f"for d2={d2:g}, d3={d3:g}, r3={geom.r3:g}")
            logger.warning(message)
            if warnings is not None:
                warnings.append(message)
            sigma2 = evaluation('Sigma2_low', math.nan)
        else:
            sigma2 = evaluation('Sigma2_low', (d4 - delta) / L, {'delta': delta})
        return [sigma2, evaluation('I_asymptote', (d3 - d2) / L)]
    if label == GENERIC_R3ZERO:
        return [evaluation(name, (d4 - value) / L, _ab(geom))
                for name, value in separating_surfaces_r3zero(geom).items()]
    if label == GENERIC:
        surfaces = [evaluation('Sigma1', (d4 - math.hypot(d3, r2)) / L)]
        for name, root in zip(('Sigma2_low', 'Sigma2_high'), sigma2_roots(geom)):
            surfaces.append(evaluation(name, (d4 - root) / L, {'d4': root}))
        return surfaces
    return []


def table1_properties(type_label: str) -> Dict:
    row = TABLE1.get(type_label)
    if row is None:
        raise UnknownTypeError(f"Unknown manipulator type: {type_label!r}")
    return row.to_dict()


def _d_type(d2: float, d3: float, d4: float) -> str:
    if d4 < d2 < d3:
        return 'D1'
    if d2 < d4 < d3:
        return 'D2'
    if d2 < d3 < d4:
        return 'D3'
    if d3 < d2 < d4:
        return 'D4'
    if d3 < d4 < d2:
        return 'D5'
    return 'D6'


def _i_type_without_surface(computed, warnings: List[str]) -> str:
    if computed is not None and computed.n_voids == 1 and computed.n_nodes_offaxis == 2:
        label = 'I4'
    else:
        label = 'I3'
    warnings.append(f"SurfaceUndefined: case-I label {label} chosen "
                    f"{'from the computed signature' if computed is not None else 'by default'}")
    return label


def _type_from_inequalities(geom: ManipulatorGeometry, family: str, computed=None,
                            warnings: Optional[List[str]] = None) -> Optional[str]:
    warnings = warnings if warnings is not None else []
    d2, d3, r2, d4 = geom.d2, geom.d3, geom.r2, geom.d4
    if family in ('C', 'E', 'G', 'H', 'J'):
        return family
    if family == 'A':
        if d4 < d3:
            return 'A1'
        return 'A2' if d4 < math.hypot(d3, r2) else 'A3'
    if family == 'B':
        return 'B1' if d3 > d4 else 'B2'
    if family == 'D':
        return _d_type(d2, d3, d4)
    if family == 'F':
        return 'F1' if d4 < math.hypot(d3, r2) else 'F2'
    if family == 'I':
        delta = case_i_delta(geom)
        if d3 > d2:
            return 'I1' if delta is not None and d4 > delta else 'I2'
        if delta is None:
            return _i_type_without_surface(computed, warnings)
        return 'I3' if d4 > delta else 'I4'
    return None


def _perturbed(geom: ManipulatorGeometry, surface: SurfaceEvaluation, step: float) -> ManipulatorGeometry:
    # the d3 = d2 planes are crossed along d3, every other surface along d4
    if surface.surface == 'I_asymptote' or surface.aux.get('plane') == 'd3=d2':
        return ManipulatorGeometry(geom.d2, geom.d3 + step, geom.r2, geom.r3, geom.d4)
    return ManipulatorGeometry(geom.d2, geom.d3, geom.r2, geom.r3, geom.d4 + step)


def transition_label(geom: ManipulatorGeometry, family: str, surface: SurfaceEvaluation) -> str:
    """'Transition X-Y' named after the types on either side of the surface."""
    step = TRANSITION_STEP * geom.L
    sides = {_type_from_inequalities(_perturbed(geom, surface, sign * step), family)
             for sign in (-1.0, 1.0)}
    ordered = sorted(sides, key=TYPE_LABELS.index)
    return 'Transition ' + '-'.join(ordered)


def _check_consistency(type_label: str, computed, warnings: List[str]) -> Optional[bool]:
    if computed is None or type_label not in TABLE1:
        return None
    row = TABLE1[type_label]
    consistent = computed.n_nodes_offaxis == row.nodes and computed.n_voids == row.voids
    if not consistent:
        message = (f"Computed topology ({computed.n_nodes_offaxis} off-axis node(s), "
                   f"{computed.n_voids} void(s)) differs from the table row for {type_label} "
                   f"({row.nodes} node(s), {row.voids} void(s))")
        logger.warning(message)
        warnings.append(message)
    return consistent


def classify(geom: ManipulatorGeometry, settings: AnalysisSettings = DEFAULT_SETTINGS,
             computed=None, analyze: bool = True) -> TypeClassification:
    """
    Family, surfaces and type of a geometry.

    With analyze=True (and no computed topology passed in) the full
    workspace analysis runs and its topology is attached; analyze=False is
    the label-only path.
    """
    warnings: List[str] = []
    case = family_case(geom, settings.zero_eps)
    surfaces = evaluate_surfaces(geom, case, settings.transition_eps, warnings)

    if computed is None and analyze:
        from services.topology import analyze_workspace
        analysis = analyze_workspace(geom, settings)
        computed = analysis.topology
        warnings.extend(analysis.warnings)

    type_label = None
    if case.has_types:
        on_surfaces = [s for s in surfaces if s.side == ON]
        if on_surfaces:
            type_label = transition_label(geom, case.label, on_surfaces[0])
            if case.label == 'I' and on_surfaces[0].surface == 'I_asymptote' and geom.d4 > geom.d2:
                warnings.append("Asymptote crossing above d4 = d2 is labelled from the inequalities; "
                                "published captions may name a different pair")
        else:
            type_label = _type_from_inequalities(geom, case.label, computed, warnings)
    elif case.label == OTHER:
        warnings.append("Zero pattern outside the ten families: geometric analysis only")

    table1 = table1_properties(type_label) if type_label in TABLE1 else None
    consistent = _check_consistency(type_label, computed, warnings)
    if table1 is not None:
        warnings.extend(f"{type_label}: {note}" for note in table1['annotations'])

    logger.info(f"Classified {geom.as_dict()} as family {case.label}, type {type_label}")
    return TypeClassification(case, type_label, table1, surfaces, computed, consistent, warnings)
