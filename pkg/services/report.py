"""
Report documents for classify/analyze runs and parameter sweeps.

Reports are plain dicts of JSON-native values so that the CLI and the web
API build them identically. Files written by the CLI carry every float
at 17 significant digits, which round-trips exactly.
"""
import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import AnalysisSettings
from services.classifier import TypeClassification
from services.geometry import ManipulatorGeometry

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
FLOAT_DIGITS = 17
INDENT = '  '


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass
class AnalysisReport:
    geometry: Dict[str, float]
    family: str
    type_label: Optional[str]
    table1: Optional[Dict]
    surfaces: List[Dict]
    configuration: Dict[str, Any]
    computed: Optional[Dict] = None
    critical_points: List[Dict] = field(default_factory=list)
    consistent: Optional[bool] = None
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return _plain({
            'version': REPORT_VERSION,
            'geometry': self.geometry,
            'family': self.family,
            'type_label': self.type_label,
            'table1': self.table1,
            'surfaces': self.surfaces,
            'computed': self.computed,
            'critical_points': self.critical_points,
            'consistent': self.consistent,
            'configuration': self.configuration,
            'warnings': self.warnings,
        })

    def to_json(self) -> str:
        return dumps_report(self.to_dict())


def format_float(value: float) -> str:
    """17 significant digits, always readable back as a float."""
    text = format(value, f'.{FLOAT_DIGITS}g')
    if not any(ch in text for ch in '.en'):
        text += '.0'
    return text


def _encode(value: Any, depth: int) -> str:
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, dict) and value:
        pad = INDENT * (depth + 1)
        items = [f"{pad}{json.dumps(key)}: {_encode(item, depth + 1)}" for key, item in value.items()]
        return '{\n' + ',\n'.join(items) + '\n' + INDENT * depth + '}'
    if isinstance(value, list) and value:
        pad = INDENT * (depth + 1)
        items = [f"{pad}{_encode(item, depth + 1)}" for item in value]
        return '[\n' + ',\n'.join(items) + '\n' + INDENT * depth + ']'
    return json.dumps(value)


def dumps_report(document: Dict) -> str:
    """
    Indented JSON with every float at 17 significant digits.

    json.dumps only writes floats through repr, so containers are laid out
    here and everything else is left to it.
    """
    return _encode(_plain(document), 0) + '\n'


def build_report(geom: ManipulatorGeometry, classification: TypeClassification,
                 settings: AnalysisSettings, analysis=None) -> AnalysisReport:
    """
    Assemble the report for a classification, with the full workspace
    analysis when one is given (analyze) or without it (classify).
    """
    warnings = list(dict.fromkeys(classification.warnings))
    report = AnalysisReport(
        geometry=geom.as_dict(),
        family=classification.family.label,
        type_label=classification.type_label,
        table1=classification.table1,
        surfaces=[s.to_dict() for s in classification.surfaces],
        configuration=settings.to_dict(),
        consistent=classification.consistent,
        warnings=warnings,
    )
    if analysis is not None:
        computed = analysis.topology.to_dict()
        computed['n_curves'] = len(analysis.singular.torus_curves)
        computed['raster'] = dict(analysis.region_map.summary, raster_n=analysis.region_map.frame.raster_n)
        computed['adjacency'] = [list(pair) for pair in analysis.region_map.adjacency]
        computed['pinch_contacts'] = [list(pair) for pair in analysis.region_map.pinch_contacts]
        computed['transition_points'] = [p.to_dict() for p in analysis.singular.transition_points]
        report.computed = computed
        report.critical_points = [p.to_dict() for p in analysis.critical_points]
        for message in analysis.warnings:
            if message not in report.warnings:
                report.warnings.append(message)
    return report


@dataclass(frozen=True)
class AxisSpec:
    """One swept parameter: name, inclusive range and sample count."""

    name: str
    lo: float
    hi: float
    n: int

    def values(self) -> np.ndarray:
        if self.n == 1:
            return np.array([self.lo])
        return self.lo + (self.hi - self.lo) * np.arange(self.n) / (self.n - 1)

    def to_dict(self) -> Dict:
        return {'name': self.name, 'lo': self.lo, 'hi': self.hi, 'n': self.n}


@dataclass
class SweepMap:
    x_axis: AxisSpec
    y_axis: AxisSpec
    fixed: Dict[str, float]
    mode: str
    labels: List[List[str]]
    on_transition: List[List[bool]]

    def __post_init__(self):
        if len(self.labels) != self.y_axis.n or any(len(row) != self.x_axis.n for row in self.labels):
            raise ValueError("Sweep cell count must equal the product of the sample counts")

    @property
    def cell_count(self) -> int:
        return self.x_axis.n * self.y_axis.n

    def cells(self) -> List[Tuple[float, float, str, bool]]:
        """Row-major cells: y outer, x inner."""
        xs, ys = self.x_axis.values(), self.y_axis.values()
        return [(float(xs[i]), float(ys[j]), self.labels[j][i], self.on_transition[j][i])
                for j in range(self.y_axis.n) for i in range(self.x_axis.n)]

    def distinct_labels(self) -> List[str]:
        return sorted({label for row in self.labels for label in row})

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['x', 'y', 'label', 'on_transition'])
        for x, y, label, transition in self.cells():
            writer.writerow([format_float(x), format_float(y), label, 'true' if transition else 'false'])
        return buffer.getvalue()

    def to_dict(self) -> Dict:
        return _plain({
            'version': REPORT_VERSION,
            'mode': self.mode,
            'x_axis': self.x_axis.to_dict(),
            'y_axis': self.y_axis.to_dict(),
            'fixed': self.fixed,
            'labels': self.labels,
            'on_transition': self.on_transition,
        })
