import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional


DEFAULT_LOG_LEVEL = 'INFO'


class Config:
    """Base configuration"""

    # Flask configuration
    SECRET_KEY = os.getenv('SECRET_KEY', 'dev-secret-key-change-in-production')
    DEBUG = False
    TESTING = False

    # Request size (geometry documents are tiny)
    MAX_CONTENT_LENGTH = 1 * 1024 * 1024  # 1MB

    # CORS configuration
    CORS_ORIGINS = os.getenv('CORS_ORIGINS', 'http://localhost:3000').split(',')

    # Singular-curve tracing
    SINGULAR_GRID_N = 720
    SING_EPS = 1e-9
    POINT_EPS = 1e-7
    CERT_EPS = 1e-7
    TANGENT_ANGLE_EPS = 1e-3
    NODE_AXIS_EPS = 1e-6

    # Region raster
    RASTER_N = 800
    MIN_REGION_CELLS = 6
    MAX_RASTER_REFINEMENTS = 2

    # Inverse kinematics
    IK_TOL = 1e-9
    AXIS_EPS = 1e-9
    FD_STEP = 1e-5

    # Brute-force oracle
    ORACLE_GRID_N = 1024
    ORACLE_REFINE_ITERS = 30
    ORACLE_DEDUPE_TOL = 1e-6

    # Classification
    TRANSITION_EPS = 1e-9
    ZERO_EPS = 1e-12

    SEED = 0
    MAX_WORKERS = 4

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', DEFAULT_LOG_LEVEL)
    LOG_FILE = 'app.log'


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True
    CORS_ORIGINS = ['http://localhost:3000', 'http://127.0.0.1:3000']


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False


class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    LOG_FILE = None
    # Coarser defaults keep the HTTP tests quick
    SINGULAR_GRID_N = 360
    RASTER_N = 400


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


@dataclass(frozen=True)
class AnalysisSettings:
    """
    Immutable bundle of grids and tolerances used by one analysis run.

    Tolerances are relative: lengths are scaled by the characteristic
    length L of the geometry, determinants by L**3.
    """

    grid_n: int = Config.SINGULAR_GRID_N
    raster_n: int = Config.RASTER_N
    oracle_grid_n: int = Config.ORACLE_GRID_N
    oracle_refine_iters: int = Config.ORACLE_REFINE_ITERS
    oracle_dedupe_tol: float = Config.ORACLE_DEDUPE_TOL
    fd_step: float = Config.FD_STEP
    ik_tol: float = Config.IK_TOL
    axis_eps: float = Config.AXIS_EPS
    sing_eps: float = Config.SING_EPS
    point_eps: float = Config.POINT_EPS
    cert_eps: float = Config.CERT_EPS
    transition_eps: float = Config.TRANSITION_EPS
    zero_eps: float = Config.ZERO_EPS
    tangent_angle_eps: float = Config.TANGENT_ANGLE_EPS
    node_axis_eps: float = Config.NODE_AXIS_EPS
    min_region_cells: int = Config.MIN_REGION_CELLS
    max_raster_refinements: int = Config.MAX_RASTER_REFINEMENTS
    seed: int = Config.SEED
    max_workers: int = Config.MAX_WORKERS
    strict: bool = False

    @classmethod
    def from_config(cls, config_class=Config) -> 'AnalysisSettings':
        """Build settings from a Flask-style config class or mapping."""
        get = config_class.get if isinstance(config_class, dict) else (
            lambda key, default=None: getattr(config_class, key, default))
        return cls(
            grid_n=get('SINGULAR_GRID_N', cls.grid_n),
            raster_n=get('RASTER_N', cls.raster_n),
            oracle_grid_n=get('ORACLE_GRID_N', cls.oracle_grid_n),
            oracle_refine_iters=get('ORACLE_REFINE_ITERS', cls.oracle_refine_iters),
            oracle_dedupe_tol=get('ORACLE_DEDUPE_TOL', cls.oracle_dedupe_tol),
            fd_step=get('FD_STEP', cls.fd_step),
            ik_tol=get('IK_TOL', cls.ik_tol),
            axis_eps=get('AXIS_EPS', cls.axis_eps),
            sing_eps=get('SING_EPS', cls.sing_eps),
            point_eps=get('POINT_EPS', cls.point_eps),
            cert_eps=get('CERT_EPS', cls.cert_eps),
            transition_eps=get('TRANSITION_EPS', cls.transition_eps),
            zero_eps=get('ZERO_EPS', cls.zero_eps),
            tangent_angle_eps=get('TANGENT_ANGLE_EPS', cls.tangent_angle_eps),
            node_axis_eps=get('NODE_AXIS_EPS', cls.node_axis_eps),
            min_region_cells=get('MIN_REGION_CELLS', cls.min_region_cells),
            max_raster_refinements=get('MAX_RASTER_REFINEMENTS', cls.max_raster_refinements),
            seed=get('SEED', cls.seed),
            max_workers=get('MAX_WORKERS', cls.max_workers),
        )

    def with_overrides(self, **overrides: Optional[Any]) -> 'AnalysisSettings':
        """
        Return a copy with the given fields replaced.

        None values are ignored so CLI options that were not given can be
        passed straight through. Unknown keys raise ValueError.
        """
        known = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in known:
                raise ValueError(f"Unknown analysis setting: {key}")
            changes[key] = value
        updated = replace(self, **changes)
        updated.validate()
        return updated

    def validate(self) -> None:
        if self.grid_n < 64:
            raise ValueError(f"grid_n must be >= 64, got {self.grid_n}")
        if self.raster_n < 200:
            raise ValueError(f"raster_n must be >= 200, got {self.raster_n}")
        if self.oracle_grid_n < 256:
            raise ValueError(f"oracle_grid_n must be >= 256, got {self.oracle_grid_n}")
        if self.oracle_dedupe_tol <= 0:
            raise ValueError("oracle_dedupe_tol must be positive")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


DEFAULT_SETTINGS = AnalysisSettings()
