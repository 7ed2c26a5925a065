"""
romschwarz logging

structlog on top of the stdlib root logger. Events are key/value pairs
rendered as JSON for batch runs or as plain console lines; an optional
rotating file receives the same records.
"""

import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import structlog


_SIZE_UNITS = {'KB': 1024, 'MB': 1024 ** 2, 'GB': 1024 ** 3}


class RomSchwarzLogger:
    """
    Process-wide logging setup

    Re-initializing replaces the rotating file handler installed by the
    previous instance, so the root logger never holds more than one.
    """

    # file handler owned by the most recent instance
    _file_handler: Optional[logging.Handler] = None

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = config or {}
        self.log_level = str(self.config.get('level', 'INFO'))
        self.log_format = self.config.get('format', 'console')
        self.log_file = self.config.get('file')
        self.max_size = self.config.get('max_size', '10MB')
        self.backup_count = self.config.get('backup_count', 5)

        self._setup_logging()

    @property
    def level(self) -> int:
        return getattr(logging, self.log_level.upper(), logging.INFO)

    def _renderer(self):
        if self.log_format == 'json':
            return structlog.processors.JSONRenderer()
        return structlog.dev.ConsoleRenderer(colors=False)

    def _setup_logging(self):
        structlog.configure(
            processors=[
                structlog.stdlib.filter_by_level,
                structlog.stdlib.add_logger_name,
                structlog.stdlib.add_log_level,
                structlog.stdlib.PositionalArgumentsFormatter(),
                structlog.processors.TimeStamper(fmt="iso"),
                structlog.processors.StackInfoRenderer(),
                structlog.processors.format_exc_info,
                structlog.processors.UnicodeDecoder(),
                self._renderer(),
            ],
            context_class=dict,
            logger_factory=structlog.stdlib.LoggerFactory(),
            wrapper_class=structlog.stdlib.BoundLogger,
            cache_logger_on_first_use=True,
        )

        root = logging.getLogger()
        logging.basicConfig(format="%(message)s", stream=sys.stderr, level=self.level)
        root.setLevel(self.level)
        self._replace_file_handler(root)

    def _replace_file_handler(self, root: logging.Logger):
        previous = RomSchwarzLogger._file_handler
        if previous is not None:
            root.removeHandler(previous)
            previous.close()
            RomSchwarzLogger._file_handler = None
        if not self.log_file:
            return

        log_path = Path(self.log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.handlers.RotatingFileHandler(
            log_path, maxBytes=self._parse_size(self.max_size), backupCount=self.backup_count)
        handler.setLevel(self.level)
        root.addHandler(handler)
        RomSchwarzLogger._file_handler = handler

    def _parse_size(self, size_str: str) -> int:
        """'10MB' -> bytes; a bare number is taken as bytes"""
        text = str(size_str).strip().upper()
        unit = _SIZE_UNITS.get(text[-2:])
        if unit is None:
            return int(text)
        return int(text[:-2]) * unit

    def get_logger(self, name: str) -> structlog.stdlib.BoundLogger:
        return structlog.get_logger(name)


_romschwarz_logger = None


def get_romschwarz_logger(config: Optional[Dict[str, Any]] = None) -> RomSchwarzLogger:
    """Get or create the global logger instance; a config re-initializes it"""
    global _romschwarz_logger
    if _romschwarz_logger is None or config is not None:
        _romschwarz_logger = RomSchwarzLogger(config)
    return _romschwarz_logger


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    return get_romschwarz_logger().get_logger(name)
