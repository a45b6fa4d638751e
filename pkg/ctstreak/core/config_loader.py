"""Configuration Loading Module

Loads pipeline configuration files, maps validation failures to
ConfigurationError with the offending field path (and source line where it
can be located), renders configs back to YAML and resolves the worker
thread count from config, CLI and environment.

Public Functions:
    parse_config: Load and validate a pipeline configuration file
    config_from_dict: Validate an in-memory configuration mapping
    dump_config: Render a configuration as YAML
    resolve_threads: Effective worker thread count
"""

import os
import re
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from .config_models import PipelineConfig
from .exceptions import ConfigurationError, CTStreakError, FileSystemError
from .file_reader import parse_yaml_text, read_text_file
from .logger import get_logger

logger = get_logger(__name__)


THREADS_ENV_VAR = "CTSTREAK_THREADS"


def _field_path(loc: tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc if not isinstance(part, int)) or "<root>"


def _find_key_line(content: str | None, key: str) -> int | None:
    """1-based line of the first mapping entry named `key`, if any."""
    if not content:
        return None
    pattern = re.compile(rf"^\s*(?:-\s*)?{re.escape(key)}\s*:")
    for number, line in enumerate(content.splitlines(), start=1):
        if pattern.match(line) or re.search(rf"[{{,]\s*{re.escape(key)}\s*:", line):
            return number
    return None


def _translate_validation_error(e: ValidationError, source: str, content: str | None) -> ConfigurationError:
    first = e.errors()[0]
    loc = tuple(first.get('loc', ()))
    path = _field_path(loc)
    key = str(loc[-1]) if loc else None

    if first.get('type') == 'extra_forbidden':
        message = f"Unknown configuration key '{path}'"
    elif first.get('type') == 'missing':
        message = f"Missing required configuration key '{path}'"
    else:
        message = f"Invalid value for '{path}': {first['msg']}"

    return ConfigurationError(
        message=message,
        config_key=path,
        source=source,
        line=_find_key_line(content, key) if key else None
    )


def config_from_dict(
    data: dict[str, Any],
    base_dir: str | Path | None = None,
    source: str = "<dict>",
    content: str | None = None
) -> PipelineConfig:
    """Validate a configuration mapping.

    Args:
        data: Parsed configuration mapping
        base_dir: Directory that relative phantom paths resolve against
            (the working directory when None)
        source: Name used in error reports
        content: Original text, used to locate offending keys

    Returns:
        PipelineConfig: Fully defaulted configuration

    Raises:
        ConfigurationError: On unknown keys, missing keys or invalid values
    """
    try:
        config = PipelineConfig.model_validate(data)
    except ValidationError as e:
        logger.error("Configuration validation failed", source=source, errors=e.errors())
        raise _translate_validation_error(e, source, content)
    except ConfigurationError as e:
        if e.line is None and e.config_key:
            e.line = _find_key_line(content, e.config_key.split('.')[-1])
        e.source = source
        e.details.update(line=e.line, source=source)
        logger.error("Configuration validation failed", source=source, error=e.message)
        raise

    config._base_dir = Path(base_dir).resolve() if base_dir is not None else Path.cwd()
    return config


def parse_config(file_path: str | Path) -> PipelineConfig:
    """Load and validate a pipeline configuration file.

    Relative phantom paths in the file resolve against the file's directory.

    Args:
        file_path: YAML configuration file

    Returns:
        PipelineConfig: Fully defaulted configuration

    Raises:
        FileSystemError: File missing or unreadable
        ConfigurationError: YAML syntax error (with 1-based line number),
            unknown key, missing key or invalid value (naming the field)

    Logs:
        INFO: Configuration loaded with physics mode
        ERROR: Validation failures with details

    Example:
        >>> config = parse_config("configs/two_disks.yaml")
        >>> config.physics.mode
        'beam-hardening'
    """
    path = Path(file_path)
    try:
        content = read_text_file(path)
        data = parse_yaml_text(content, source=str(path))
        config = config_from_dict(data, base_dir=path.parent, source=str(path), content=content)

        phantom_path = config.phantom_path()
        if phantom_path is not None and not phantom_path.is_file():
            raise ConfigurationError(
                message=f"Phantom file not found: {phantom_path}",
                config_key="phantom",
                source=str(path),
                line=_find_key_line(content, "phantom")
            )

        logger.info(
            "Configuration loaded",
            path=str(path),
            phantom=config.phantom,
            mode=config.physics.mode
        )
        return config

    except (FileSystemError, CTStreakError):
        raise

    except Exception as e:
        logger.error(
            "Unexpected configuration error",
            path=str(path),
            error=str(e),
            error_type=type(e).__name__
        )
        raise ConfigurationError(
            message=f"Failed to load config {path}: {e}",
            source=str(path)
        )


def dump_config(config: PipelineConfig) -> str:
    """Render the fully defaulted configuration as YAML, in field order."""
    return yaml.safe_dump(config.model_dump(mode='json'), sort_keys=False, default_flow_style=False)


def resolve_threads(configured: int | None = None, override: int | None = None) -> int:
    """Effective thread count: CLI override, then config, then CTSTREAK_THREADS, then 1.

    Raises:
        ConfigurationError: If the chosen value is not a positive integer
    """
    load_dotenv()
    if override is not None:
        value, origin = override, "cli"
    elif configured is not None:
        value, origin = configured, "config"
    else:
        raw = os.getenv(THREADS_ENV_VAR)
        if raw is None or not raw.strip():
            return 1
        try:
            value, origin = int(raw), THREADS_ENV_VAR
        except ValueError:
            raise ConfigurationError(
                message=f"{THREADS_ENV_VAR} must be an integer, got '{raw}'",
                config_key="threads",
                source="environment"
            )
    if value < 1:
        raise ConfigurationError(message=f"threads must be >= 1, got {value}", config_key="threads", source=origin)
    return int(value)
