# shadowformer/utils/logging.py

import logging
import sys
from datetime import datetime
from typing import Optional

from colorama import Fore, Style

LOGGER_NAME = "shadowformer"

LEVEL_COLORS: dict[str, str] = {
    "DEBUG": Fore.WHITE,
    "INFO": Fore.CYAN,
    "SUCCESS": Fore.GREEN,
    "WARNING": Fore.YELLOW,
    "ERROR": Fore.RED,
}

SUCCESS = 25
logging.addLevelName(SUCCESS, "SUCCESS")

_logger = logging.getLogger(LOGGER_NAME)


def timestamp() -> str:
    return f"[{datetime.now():%Y-%m-%d %H:%M:%S}]"


class ColorFormatter(logging.Formatter):
    """Renders records as `[time] [LEVEL] message`, colored per level."""

    def __init__(self, color: bool = True) -> None:
        super().__init__()
        self._color = color

    def format(self, record: logging.LogRecord) -> str:
        line = f"{timestamp()} [{record.levelname}] {record.getMessage()}"
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        if not self._color:
            return line
        return LEVEL_COLORS.get(record.levelname, "") + line + Style.RESET_ALL


def setup_logging(level: str = "INFO", color: bool = True, stream=None) -> None:
    """Install one stderr handler on the package logger (idempotent)."""

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(ColorFormatter(color=color))
    _logger.handlers = [handler]
    _logger.setLevel(level.upper())
    _logger.propagate = False


def log_debug(msg: str, logger: Optional[logging.Logger] = None):
    (logger or _logger).debug(msg)


def log_info(msg: str, logger: Optional[logging.Logger] = None):
    (logger or _logger).info(msg)


def log_success(msg: str, logger: Optional[logging.Logger] = None):
    (logger or _logger).log(SUCCESS, msg)


def log_warning(msg: str, logger: Optional[logging.Logger] = None):
    (logger or _logger).warning(msg)


def log_error(msg: str, logger: Optional[logging.Logger] = None):
    (logger or _logger).error(msg)
