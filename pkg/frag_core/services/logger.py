import inspect
import json
import logging
import logging.handlers
import sys
import traceback
from datetime import datetime
from pathlib import Path
from typing import Optional

import psutil

from ..config import LOG_LEVEL, LOG_FILE, LOG_JSON, DEBUG


class CustomFormatter(logging.Formatter):
    """Formatter with colour support and a structured JSON mode."""

    COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
        'RESET': '\033[0m'
    }

    def __init__(self, use_color: bool = True, use_json: bool = False):
        self.use_color = use_color
        self.use_json = use_json

        if use_json:
            super().__init__()
        else:
            format_string = (
                "%(asctime)s | %(name)-24s | %(levelname)-8s | %(message)s"
            )
            super().__init__(format_string, datefmt='%Y-%m-%d %H:%M:%S')

    def format(self, record):
        if self.use_json:
            return self._format_json(record)
        return self._format_text(record)

    def _format_json(self, record):
        log_entry = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno,
            'thread': record.thread,
        }

        if record.exc_info:
            log_entry['exception'] = {
                'type': record.exc_info[0].__name__,
                'message': str(record.exc_info[1]),
                'traceback': traceback.format_exception(*record.exc_info)
            }

        if hasattr(record, 'extra_fields'):
            log_entry.update(record.extra_fields)

        return json.dumps(log_entry, default=str)

    def _format_text(self, record):
        formatted = super().format(record)
        extra = getattr(record, 'extra_fields', None)
        if extra:
            formatted += " | " + json.dumps(extra, default=str, sort_keys=True)

        if self.use_color and sys.stderr.isatty():
            level_color = self.COLORS.get(record.levelname, '')
            return f"{level_color}{formatted}{self.COLORS['RESET']}"

        return formatted


class FragLabLogger:
    """Centralized logging service.

    Console output goes to stderr so that command output on stdout stays
    machine-readable. A rotating JSON log (plus a separate error log) is added
    when ``LOG_FILE`` is configured.
    """

    _instance = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if self._initialized:
            return
        self._initialized = True
        self._setup_logging()

    def _setup_logging(self):
        root_logger = logging.getLogger('fraglab')
        root_logger.setLevel(logging.DEBUG if DEBUG else getattr(logging, LOG_LEVEL.upper(), logging.INFO))
        root_logger.handlers.clear()
        root_logger.propagate = True

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(CustomFormatter(use_color=True, use_json=LOG_JSON))
        root_logger.addHandler(console_handler)

        if LOG_FILE:
            log_dir = Path(LOG_FILE).parent
            log_dir.mkdir(parents=True, exist_ok=True)
            file_formatter = CustomFormatter(use_color=False, use_json=True)

            file_handler = logging.handlers.RotatingFileHandler(
                LOG_FILE,
                maxBytes=10 * 1024 * 1024,
                backupCount=5
            )
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(file_formatter)
            root_logger.addHandler(file_handler)

            error_handler = logging.handlers.RotatingFileHandler(
                str(Path(LOG_FILE).with_suffix('.error.log')),
                maxBytes=10 * 1024 * 1024,
                backupCount=3
            )
            error_handler.setLevel(logging.ERROR)
            error_handler.setFormatter(file_formatter)
            root_logger.addHandler(error_handler)

        root_logger.debug(f"Logging initialized (level={LOG_LEVEL}, file={LOG_FILE or '-'})")

    def get_logger(self, name: str) -> logging.Logger:
        # Everything hangs off the 'fraglab' logger so one handler set serves all modules
        if not name.startswith('fraglab'):
            name = f"fraglab.{name}"
        return logging.getLogger(name)

    def _emit(self, channel: str, level: int, message: str, extra_fields: dict):
        logger = self.get_logger(channel)
        if not logger.isEnabledFor(level):
            return
        record = logger.makeRecord(logger.name, level, '', 0, message, (), None)
        record.extra_fields = extra_fields
        logger.handle(record)

    def log_experiment_event(self, name: str, event: str, details: dict = None):
        """Log an experiment lifecycle event (started, replicate batch, finished)."""
        self._emit(
            'experiments', logging.INFO, f"Experiment {name}: {event}",
            {'experiment': name, 'event': event, 'details': details or {}}
        )

    def log_check_result(self, check: str, passed: bool, details: dict = None):
        """Log the outcome of a verification check."""
        level = logging.INFO if passed else logging.ERROR
        verdict = "passed" if passed else "FAILED"
        self._emit(
            'checks', level, f"Check {check} {verdict}",
            {'check': check, 'passed': passed, 'details': details or {}}
        )

    def log_performance(self, operation: str, duration: float, metadata: dict = None):
        """Log wall time and resident memory of an operation."""
        metadata = dict(metadata or {})
        metadata.setdefault('rss_mb', round(psutil.Process().memory_info().rss / 1024 ** 2, 1))
        self._emit(
            'performance', logging.DEBUG, f"Operation {operation} took {duration:.3f}s",
            {'operation': operation, 'duration_seconds': duration, 'metadata': metadata}
        )

    def log_error(self, error: Exception, context: str = None, extra_data: dict = None):
        """Log errors with context."""
        message = f"Error in {context}: {error}" if context else f"Error: {error}"
        self._emit(
            'errors', logging.ERROR, message,
            {
                'error_type': type(error).__name__,
                'error_message': str(error),
                'context': context,
                'extra_data': extra_data or {}
            }
        )


_service: Optional[FragLabLogger] = None


def _logger_service() -> FragLabLogger:
    global _service
    if _service is None:
        _service = FragLabLogger()
    return _service


def get_logger(name: str = None) -> logging.Logger:
    """Get a logger instance."""
    if name is None:
        frame = inspect.currentframe().f_back
        name = frame.f_globals.get('__name__', 'unknown')
    return _logger_service().get_logger(name)


def log_experiment_event(name: str, event: str, details: dict = None):
    _logger_service().log_experiment_event(name, event, details)


def log_check_result(check: str, passed: bool, details: dict = None):
    _logger_service().log_check_result(check, passed, details)


def log_performance(operation: str, duration: float, metadata: dict = None):
    _logger_service().log_performance(operation, duration, metadata)


def log_error(error: Exception, context: str = None, extra_data: dict = None):
    _logger_service().log_error(error, context, extra_data)
