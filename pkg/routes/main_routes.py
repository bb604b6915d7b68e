from flask import Blueprint, jsonify

from services.classifier import TYPE_LABELS

main_bp = Blueprint('main', __name__)


@main_bp.route('/health', methods=['GET'])
def health_check():
    """Health check endpoint"""
    return jsonify({
        'status': 'healthy',
        'service': 'workspace-topology-api',
        'version': '1.0.0'
    }), 200


@main_bp.route('/api/', methods=['GET'])
def api_index():
    return jsonify({
        'status': 'ok',
        'endpoints': {
            'classify': '/api/classify',
            'analyze': '/api/analyze',
            'sweep': '/api/sweep',
            'health': '/health',
        },
        'types': list(TYPE_LABELS),
    }), 200
