"""Logging Module

loguru with a run id column. Stage code passes structured fields as keyword
arguments; they are rendered as `key=value` pairs after the message, and a
`duration_ms` field becomes a `(12.34ms)` suffix.

Console output is set up at import (level from CTSTREAK_LOG_LEVEL). The CLI
and `api.set_logs` add a rotating `ctstreak.log` file when a log directory is
given.

Public Components:
    get_logger: Module logger
    configure_logging: Console level and optional log file
"""

import os
import sys
from pathlib import Path
from typing import Any, Literal

from loguru import logger

from .exceptions import ConfigurationError, ExecutionError, FileSystemError


LogLevel = Literal['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
DEFAULT_RUN_ID = "----------"
VALID_LEVELS = {'DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'}
LOG_FILE_NAME = "ctstreak.log"

_FIELDS = "{extra[run_id]:<12} | {level: <8} | {extra[clean_name]} | {message}"
CONSOLE_FORMAT = "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | " + _FIELDS
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | " + _FIELDS


def _normalize_run_id(run_id: Any) -> str:
    return DEFAULT_RUN_ID if run_id is None else str(run_id)


class LoggerWrapper:
    """Formats keyword fields into the message and binds the run id.

    Example:
        >>> log = get_logger("ctstreak.core.radon")
        >>> log.info("FBP reconstruction complete", run_id="a1b2", n=256, duration_ms=812.4)
    """

    def __init__(self, logger_instance: Any) -> None:
        self._logger = logger_instance

    def __getattr__(self, name):
        if name not in ('debug', 'info', 'warning', 'error', 'critical'):
            return getattr(self._logger, name)

        def log_method(message, **kwargs):
            try:
                run_id = _normalize_run_id(kwargs.pop('run_id', None))
                duration_ms = kwargs.pop('duration_ms', None)
                if duration_ms is not None:
                    message = f"{message} ({duration_ms:.2f}ms)"
                fields = ' | '.join(f"{k}={v}" for k, v in kwargs.items())
                text = f"{message} | {fields}" if fields else message
                return getattr(self._logger.bind(run_id=run_id), name)(text)
            except Exception:
                raise ExecutionError(
                    message=f"Failed to log {name} message. Verify message and extra fields are valid.",
                    operation="log_message",
                    details={"level": name}
                )
        return log_method


def get_logger(name: str) -> LoggerWrapper:
    """Logger for a module; the 'ctstreak.core.' prefix is dropped from its column."""
    return LoggerWrapper(logger.bind(name=name, clean_name=name.replace('ctstreak.core.', ''),
                                     run_id=DEFAULT_RUN_ID))


def configure_logging(
    log_dir: Path | None = None,
    console_level: LogLevel = 'INFO',
    file_level: LogLevel = 'DEBUG',
    rotation: str = '10 MB',
    retention: str = '1 week'
) -> None:
    """Replace all handlers: stderr at `console_level`, plus `ctstreak.log`
    under `log_dir` at `file_level` when a directory is given.

    Raises:
        ConfigurationError: If a level is unknown or a handler cannot be added
        FileSystemError: If the log directory cannot be created or written
    """
    for key, level in (('console_level', console_level), ('file_level', file_level)):
        if level not in VALID_LEVELS:
            raise ConfigurationError(
                message=f"Invalid {key}: {level}. Must be one of: {', '.join(sorted(VALID_LEVELS))}",
                config_key=key
            )

    logger.remove()
    try:
        logger.add(sys.stderr, format=CONSOLE_FORMAT, colorize=True, level=console_level)
    except Exception as e:
        raise ConfigurationError(message=f"Failed to configure console logging: {e}", source="logging",
                                 config_key="format")
    if log_dir is None:
        return

    target_dir = Path(log_dir)
    log_file = target_dir / LOG_FILE_NAME
    try:
        target_dir.mkdir(parents=True, exist_ok=True)
        logger.add(str(log_file), format=FILE_FORMAT, rotation=rotation, retention=retention, level=file_level)
    except Exception as e:
        raise FileSystemError(
            message=f"Cannot write the log file: {e}",
            path=str(log_file),
            operation="create"
        )
    get_logger(__name__).info("Logging initialized", log_file=str(log_file))


try:
    _env_level = os.getenv('CTSTREAK_LOG_LEVEL', 'INFO').upper()
    configure_logging(console_level=_env_level if _env_level in VALID_LEVELS else 'INFO')
except Exception:
    logger.add(sys.stderr, format="{message}")
    logger.error("Logging initialization failed. Falling back to basic stderr logging.")
