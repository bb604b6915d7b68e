import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from config import AnalysisSettings
from services.errors import GeometryFileError
from services.geometry import ManipulatorGeometry, geometry_from_mapping

logger = logging.getLogger(__name__)


class FileParser:
    """
    Reads geometry documents (JSON) and analysis settings files (YAML)
    """

    # Geometry documents are tiny; anything larger is not one
    MAX_FILE_SIZE = 1024 * 1024

    def read_file(self, file_path: Union[str, Path], encoding: str = 'utf-8') -> str:
        """
        Read a text file

        Args:
            file_path: Path to file
            encoding: Text encoding

        Returns:
            File content as string

        Raises:
            GeometryFileError: missing, oversized or undecodable file
        """
        path = Path(file_path)
        try:
            if path.stat().st_size > self.MAX_FILE_SIZE:
                raise GeometryFileError(f"File too large: {path}")
            with open(path, 'r', encoding=encoding) as f:
                return f.read()
        except FileNotFoundError:
            raise GeometryFileError(f"File not found: {path}")
        except UnicodeDecodeError:
            raise GeometryFileError(f"Could not decode file: {path}")
        except OSError as e:
            raise GeometryFileError(f"Error reading file {path}: {str(e)}")

    def parse_geometry(self, content: str, source: str = '<string>') -> ManipulatorGeometry:
        """Parse a JSON geometry document {d2, d3, r2, r3, d4}."""
        try:
            data = json.loads(content)
        except json.JSONDecodeError as e:
            raise GeometryFileError(f"Invalid JSON in {source}: {e.msg} (line {e.lineno})")
        geometry = geometry_from_mapping(data)
        logger.debug(f"Parsed geometry from {source}: {geometry.as_dict()}")
        return geometry

    def read_geometry(self, file_path: Union[str, Path]) -> ManipulatorGeometry:
        return self.parse_geometry(self.read_file(file_path), source=str(file_path))

    def parse_settings(self, content: str, source: str = '<string>') -> Dict[str, Any]:
        """Parse a YAML mapping of AnalysisSettings field names to values."""
        try:
            data = yaml.safe_load(content)
        except yaml.YAMLError as e:
            raise GeometryFileError(f"Invalid YAML in {source}: {str(e)}")
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise GeometryFileError(f"Settings file {source} must contain a mapping")
        return data

    def read_settings(self, file_path: Optional[Union[str, Path]],
                      base: AnalysisSettings) -> AnalysisSettings:
        """Apply a YAML settings file on top of base settings (no file: base unchanged)."""
        if file_path is None:
            return base
        overrides = self.parse_settings(self.read_file(file_path), source=str(file_path))
        try:
            return base.with_overrides(**overrides)
        except (TypeError, ValueError) as e:
            raise GeometryFileError(f"Invalid settings in {file_path}: {str(e)}")
