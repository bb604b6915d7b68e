"""
Utility helpers shared by the CLI and the web app
"""

from .file_parser import FileParser
from .log_config import setup_logging

__all__ = ['FileParser', 'setup_logging']
