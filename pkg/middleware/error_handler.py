import traceback

from flask import current_app, jsonify
from werkzeug.exceptions import HTTPException

from services.errors import KinematicsError, UnresolvedRegionError


def error_response(code, message, details=None):
    """JSON error body shared by every handler below"""
    body = {'status': 'error', 'code': code, 'message': message}
    if details is not None:
        body['details'] = details
    return jsonify(body), code


def register_error_handlers(app):
    """Register application error handlers"""

    @app.errorhandler(UnresolvedRegionError)
    def unresolved_region(e):
        """Strict region decomposition gave up; the geometry itself was fine"""
        current_app.logger.warning(f"Unresolved region: {str(e)}")
        return error_response(422, 'Workspace regions could not be resolved at this raster', str(e))

    @app.errorhandler(KinematicsError)
    def kinematics_error(e):
        """Geometry or target rejected by the services after schema validation"""
        current_app.logger.warning(f"Rejected request: {type(e).__name__}: {str(e)}")
        return error_response(400, str(e), type(e).__name__)

    @app.errorhandler(400)
    def bad_request(e):
        return error_response(400, 'Bad request', str(e))

    @app.errorhandler(404)
    def not_found(e):
        return error_response(404, 'Resource not found')

    @app.errorhandler(405)
    def method_not_allowed(e):
        return error_response(405, 'Method not allowed; analysis endpoints take POST')

    @app.errorhandler(413)
    def request_entity_too_large(e):
        limit_kb = (app.config.get('MAX_CONTENT_LENGTH') or 0) // 1024
        return error_response(413, f'Geometry document too large. Maximum size is {limit_kb}KB.')

    @app.errorhandler(500)
    def internal_server_error(e):
        current_app.logger.error(f"Internal server error: {str(e)}")
        current_app.logger.error(traceback.format_exc())
        return error_response(500, 'Internal server error',
                              str(e) if app.debug else 'An unexpected error occurred')

    @app.errorhandler(Exception)
    def handle_exception(e):
        # Pass through HTTP errors
        if isinstance(e, HTTPException):
            return e

        # numerical failures deep inside an analysis end up here
        current_app.logger.error(f"Analysis failed: {type(e).__name__}: {str(e)}")
        current_app.logger.error(traceback.format_exc())
        return error_response(500, 'Analysis failed unexpectedly', str(e) if app.debug else None)
