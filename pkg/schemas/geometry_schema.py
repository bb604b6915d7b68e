import math

from middleware.validation import BaseValidator
from services.geometry import PARAMETER_NAMES


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


class GeometryValidator(BaseValidator):
    """Validator for a JSON geometry body {d2, d3, r2, r3, d4}

    Only shape is checked here; the physical constraints (d4 > 0, no
    negative lengths, the degenerate sphere arm) are enforced by
    make_geometry and reported through the KinematicsError handler.
    """

    EXTRA_KEYS = ()

    def validate_json(self, data):
        errors = []

        if not isinstance(data, dict) or not data:
            return ['Request body must be a JSON object with d2, d3, r2, r3, d4']

        for name in PARAMETER_NAMES:
            if name not in data:
                errors.append(f'Missing required field: {name}')
            elif not _is_number(data[name]):
                errors.append(f'Field {name} must be a finite number')

        unknown = sorted(set(data) - set(PARAMETER_NAMES) - set(self.EXTRA_KEYS))
        if unknown:
            errors.append(f'Unknown field(s): {", ".join(unknown)}')

        return errors


class AnalyzeValidator(GeometryValidator):
    """Geometry body plus optional grid/raster resolution overrides"""

    EXTRA_KEYS = ('grid', 'raster')
    MIN_GRID = 64
    MIN_RASTER = 200
    # keeps a single request from tying up a worker for minutes
    MAX_GRID = 4096
    MAX_RASTER = 3200

    def validate_json(self, data):
        errors = super().validate_json(data)
        if not isinstance(data, dict):
            return errors

        for key, lo, hi in (('grid', self.MIN_GRID, self.MAX_GRID),
                            ('raster', self.MIN_RASTER, self.MAX_RASTER)):
            if key not in data or data[key] is None:
                continue
            value = data[key]
            if isinstance(value, bool) or not isinstance(value, int):
                errors.append(f'Field {key} must be an integer')
            elif not lo <= value <= hi:
                errors.append(f'Field {key} must be between {lo} and {hi}')

        return errors
