# app.py
import logging
import os
import sys

from dotenv import load_dotenv
from flask import Flask
from flask_cors import CORS

# Load environment variables from .env file
load_dotenv()

from config import AnalysisSettings, config
from middleware.error_handler import register_error_handlers
from routes.analysis_routes import analysis_bp
from routes.main_routes import main_bp
from utils.log_config import setup_logging as configure_root_logger


def create_app(config_class=None):
    if config_class is None:
        config_class = config[os.getenv('FLASK_ENV', 'default')]

    app = Flask(__name__)
    app.config.from_object(config_class)

    setup_logging(app)
    setup_extensions(app)

    register_blueprints(app)
    register_error_handlers(app)

    # fail at startup, not on the first request, if the config is unusable
    AnalysisSettings.from_config(app.config).validate()

    return app


def setup_logging(app):
    level = app.config.get('LOG_LEVEL', 'INFO')
    configure_root_logger(level, log_file=app.config.get('LOG_FILE'), stream=sys.stdout)
    app.logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    app.logger.info('Application logging configured')


def setup_extensions(app):
    CORS(app, resources={
        r"/api/*": {
            "origins": app.config['CORS_ORIGINS'],
            "methods": ["GET", "POST", "OPTIONS"],
            "allow_headers": ["Content-Type"],
        }
    })
    app.logger.info('Extensions initialized')


def register_blueprints(app):
    # /health and the /api/ index
    app.register_blueprint(main_bp)
    app.register_blueprint(analysis_bp, url_prefix='/api')
    app.logger.info('Blueprints registered')


if __name__ == '__main__':
    app = create_app()
    app.run(host='0.0.0.0', port=5000, debug=app.config['DEBUG'])
