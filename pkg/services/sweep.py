"""
Parameter-space sweeps: classify (or count nodes of) every geometry on a
two-parameter grid.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Tuple

import numpy as np
from scipy import ndimage

from config import DEFAULT_SETTINGS, AnalysisSettings
from services.classifier import classify
from services.errors import KinematicsError
from services.geometry import PARAMETER_NAMES, make_geometry
from services.report import AxisSpec, SweepMap
from services.singularity import analyze_singularities

logger = logging.getLogger(__name__)

MODES = ('label', 'nodes')
INVALID = 'INVALID'


def parse_axis(text: str) -> AxisSpec:
    """
    Parse 'name:lo:hi:n'.

    Raises:
        ValueError: malformed spec, unknown parameter, lo >= hi or n < 1
    """
    parts = text.split(':')
    if len(parts) != 4:
        raise ValueError(f"Axis must look like name:lo:hi:n, got {text!r}")
    name, lo, hi, n = parts
    if name not in PARAMETER_NAMES:
        raise ValueError(f"Unknown parameter {name!r}; expected one of {', '.join(PARAMETER_NAMES)}")
    try:
        lo_value, hi_value, count = float(lo), float(hi), int(n)
    except ValueError:
        raise ValueError(f"Axis bounds must be numbers and n an integer, got {text!r}")
    if not lo_value < hi_value:
        raise ValueError(f"Axis {name}: lo must be below hi")
    if count < 1:
        raise ValueError(f"Axis {name}: n must be >= 1")
    return AxisSpec(name, lo_value, hi_value, count)


def parse_fixed(items) -> Dict[str, float]:
    """Parse ['k=v', ...] into a parameter dict."""
    fixed = {}
    for item in items:
        key, sep, value = item.partition('=')
        if not sep or key not in PARAMETER_NAMES:
            raise ValueError(f"Fixed parameter must look like name=value with a known name, got {item!r}")
        try:
            fixed[key] = float(value)
        except ValueError:
            raise ValueError(f"Fixed parameter {key} is not a number: {value!r}")
    return fixed


def _evaluate_cell(params: Dict[str, float], mode: str, settings: AnalysisSettings) -> Tuple[str, bool]:
    try:
        geom = make_geometry(*(params[name] for name in PARAMETER_NAMES))
    except KinematicsError as e:
        logger.debug(f"Invalid sweep cell {params}: {e}")
        return INVALID, False
    if mode == 'nodes':
        singular = analyze_singularities(geom, settings)
        return str(sum(1 for n in singular.nodes if not n.on_axis)), False
    result = classify(geom, settings, analyze=False)
    return result.type_label or result.family.label, result.is_transition


def run_sweep(x_axis: AxisSpec, y_axis: AxisSpec, fixed: Dict[str, float], mode: str = 'label',
              settings: AnalysisSettings = DEFAULT_SETTINGS) -> SweepMap:
    """
    Evaluate every cell concurrently; the map is assembled row-major (y outer).

    Raises:
        ValueError: axes coincide, a parameter is missing or doubly given, or mode unknown
    """
    if mode not in MODES:
        raise ValueError(f"Unknown sweep mode {mode!r}")
    if x_axis.name == y_axis.name:
        raise ValueError("The two swept parameters must differ")
    clash = {x_axis.name, y_axis.name} & set(fixed)
    if clash:
        raise ValueError(f"Parameter(s) both swept and fixed: {', '.join(sorted(clash))}")
    missing = set(PARAMETER_NAMES) - {x_axis.name, y_axis.name} - set(fixed)
    if missing:
        raise ValueError(f"Missing fixed parameter(s): {', '.join(sorted(missing))}")

    cells = []
    for y in y_axis.values():
        for x in x_axis.values():
            params = dict(fixed)
            params[x_axis.name] = float(x)
            params[y_axis.name] = float(y)
            cells.append(params)

    logger.info(f"Sweeping {len(cells)} cell(s) in {mode} mode with {settings.max_workers} worker(s)")
    with ThreadPoolExecutor(max_workers=settings.max_workers) as executor:
        results = list(executor.map(lambda p: _evaluate_cell(p, mode, settings), cells))

    labels: List[List[str]] = []
    transitions: List[List[bool]] = []
    for row in range(y_axis.n):
        chunk = results[row * x_axis.n:(row + 1) * x_axis.n]
        labels.append([label for label, _ in chunk])
        transitions.append([flag for _, flag in chunk])
    return SweepMap(x_axis, y_axis, dict(fixed), mode, labels, transitions)


def label_domains(sweep: SweepMap) -> Dict[str, int]:
    """Number of 4-connected domains per label (transition and invalid cells excluded)."""
    grid = np.array(sweep.labels)
    domains = {}
    for label in sweep.distinct_labels():
        if label == INVALID or label.startswith('Transition'):
            continue
        _, count = ndimage.label(grid == label)
        domains[label] = int(count)
    return domains
