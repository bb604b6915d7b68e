import logging
import sys
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: str = 'INFO', log_file: Optional[str] = None, stream=None) -> None:
    """
    Configure the root logger.

    Args:
        level: Level name, e.g. 'INFO'
        log_file: Optional file to log to in addition to the stream
        stream: Stream handler target (stderr by default, keeping stdout for reports)
    """
    numeric_level = getattr(logging, str(level).upper(), logging.INFO)
    formatter = logging.Formatter(LOG_FORMAT)

    handlers = [logging.StreamHandler(stream or sys.stderr)]
    if log_file:
        if sys.platform == 'win32':
            handlers.append(logging.FileHandler(log_file, encoding='utf-8'))
        else:
            handlers.append(logging.FileHandler(log_file))

    # clear existing handlers first to avoid duplicates
    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.setLevel(numeric_level)
    for handler in handlers:
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)
