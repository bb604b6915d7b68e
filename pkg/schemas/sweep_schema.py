from middleware.validation import BaseValidator
from services.geometry import PARAMETER_NAMES


class SweepValidator(BaseValidator):
    """Validator for label-mode sweep requests

    Body:
        {"x": {"name": "d3", "lo": 0.5, "hi": 4, "n": 40},
         "y": {"name": "d4", "lo": 0.5, "hi": 4, "n": 40},
         "fixed": {"d2": 1, "r2": 0, "r3": 0}}
    """

    MAX_CELLS = 10000

    def _validate_axis(self, key, axis):
        errors = []
        if not isinstance(axis, dict):
            return [f'Field {key} must be an object with name, lo, hi, n']
        if axis.get('name') not in PARAMETER_NAMES:
            errors.append(f'{key}.name must be one of {", ".join(PARAMETER_NAMES)}')
        for bound in ('lo', 'hi'):
            value = axis.get(bound)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                errors.append(f'{key}.{bound} must be a number')
        n = axis.get('n')
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            errors.append(f'{key}.n must be a positive integer')
        if not errors and not axis['lo'] < axis['hi']:
            errors.append(f'{key}.lo must be below {key}.hi')
        return errors

    def validate_json(self, data):
        if not isinstance(data, dict) or not data:
            return ['Request body must be a JSON object with x, y and fixed']

        errors = []
        for key in ('x', 'y'):
            if key not in data:
                errors.append(f'Missing required field: {key}')
            else:
                errors.extend(self._validate_axis(key, data[key]))

        fixed = data.get('fixed', {})
        if not isinstance(fixed, dict):
            errors.append('Field fixed must be an object of parameter values')
        else:
            for name, value in fixed.items():
                if name not in PARAMETER_NAMES:
                    errors.append(f'Unknown fixed parameter: {name}')
                elif isinstance(value, bool) or not isinstance(value, (int, float)):
                    errors.append(f'Fixed parameter {name} must be a number')

        if 'mode' in data and data['mode'] != 'label':
            errors.append('Only label mode sweeps are served over HTTP')

        if not errors and data['x']['n'] * data['y']['n'] > self.MAX_CELLS:
            errors.append(f'Sweep is limited to {self.MAX_CELLS} cells')

        return errors
