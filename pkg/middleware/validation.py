from functools import wraps

from flask import current_app, jsonify, request


def validate_request(validator_class):
    """
    Decorator to validate request data

    Usage:
        @validate_request(GeometryValidator)
        def classify_geometry():
            ...
    """

    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            current_app.logger.debug(f"Validation decorator called for {f.__name__}")

            validator = validator_class()

            if request.is_json:
                json_data = request.get_json(silent=True)
                errors = validator.validate_json(json_data if json_data is not None else {})
            else:
                errors = validator.validate_form(request.form)

            if errors:
                # first error as the main message
                error_message = errors[0]
                if len(errors) > 1:
                    error_message += f' (and {len(errors) - 1} more error(s))'

                current_app.logger.warning(f"Validation failed for {f.__name__}: {errors}")

                return jsonify({
                    'status': 'error',
                    'message': error_message,
                    'errors': errors
                }), 400

            return f(*args, **kwargs)

        return decorated_function
    return decorator


class BaseValidator:
    """Base validator class"""

    def validate_json(self, data):
        """Override in subclass"""
        return []

    def validate_form(self, form):
        """Analysis endpoints only accept JSON bodies"""
        return ['Request body must be JSON (Content-Type: application/json)']
