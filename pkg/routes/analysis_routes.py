from flask import Blueprint, current_app, jsonify, request

from config import AnalysisSettings
from middleware.validation import validate_request
from schemas.geometry_schema import AnalyzeValidator, GeometryValidator
from schemas.sweep_schema import SweepValidator
from services.classifier import classify
from services.geometry import geometry_from_mapping
from services.report import AxisSpec, build_report
from services.sweep import label_domains, run_sweep
from services.topology import analyze_workspace

analysis_bp = Blueprint('analysis', __name__)


def _settings(**overrides) -> AnalysisSettings:
    return AnalysisSettings.from_config(current_app.config).with_overrides(**overrides)


def _geometry(data):
    return geometry_from_mapping({key: data[key] for key in ('d2', 'd3', 'r2', 'r3', 'd4')})


@analysis_bp.route('/classify', methods=['POST'])
@validate_request(GeometryValidator)
def classify_geometry():
    """
    Classify a geometry from its separating surfaces only (no curve tracing)
    """
    data = request.get_json()
    geom = _geometry(data)
    settings = _settings()

    result = classify(geom, settings, analyze=False)
    current_app.logger.info(f"Classified {geom.as_dict()} as {result.type_label or result.family.label}")

    return jsonify({
        'status': 'success',
        'report': build_report(geom, result, settings).to_dict()
    }), 200


@analysis_bp.route('/analyze', methods=['POST'])
@validate_request(AnalyzeValidator)
def analyze_geometry():
    """
    Full analysis: singular curves, critical points, regions and type label

    Optional body keys `grid` and `raster` override the torus grid and the
    region raster resolution.
    """
    data = request.get_json()
    geom = _geometry(data)
    settings = _settings(grid_n=data.get('grid'), raster_n=data.get('raster'))

    analysis = analyze_workspace(geom, settings)
    result = classify(geom, settings, computed=analysis.topology)
    report = build_report(geom, result, settings, analysis)

    if result.consistent is False:
        current_app.logger.warning(f"Computed topology disagrees with type {result.type_label} for {geom.as_dict()}")

    return jsonify({
        'status': 'success',
        'report': report.to_dict()
    }), 200


@analysis_bp.route('/sweep', methods=['POST'])
@validate_request(SweepValidator)
def sweep_parameters():
    """
    Label-mode sweep over two parameters, the other three fixed
    """
    data = request.get_json()
    x_axis = AxisSpec(data['x']['name'], float(data['x']['lo']), float(data['x']['hi']), data['x']['n'])
    y_axis = AxisSpec(data['y']['name'], float(data['y']['lo']), float(data['y']['hi']), data['y']['n'])
    fixed = {name: float(value) for name, value in data.get('fixed', {}).items()}

    try:
        sweep = run_sweep(x_axis, y_axis, fixed, 'label', _settings())
    except ValueError as e:
        # axis/fixed combination problems (same axis twice, missing parameter)
        return jsonify({
            'status': 'error',
            'message': str(e),
            'errors': [str(e)]
        }), 400

    document = sweep.to_dict()
    document['domains'] = label_domains(sweep)
    return jsonify({
        'status': 'success',
        'sweep': document
    }), 200
