"""File Reading Module

Reads and parses text and YAML files with UTF-8 encoding. Handles file size
limits, logging, and structured error reporting for config and phantom
file operations.

Public Functions:
    read_text_file: Reads and decodes text files
    read_yaml_file: Reads and parses YAML files with line-numbered errors
"""

import time
from pathlib import Path
from typing import Any

import yaml

from .exceptions import ConfigurationError, FileSystemError
from .file_validator import validate_file
from .logger import get_logger

logger = get_logger(__name__)


# Maximum allowed size for text inputs (10MB)
MAX_FILE_SIZE = 10 * 1024 * 1024


def read_text_file(
    file_path: str | Path,
    max_size: int | None = MAX_FILE_SIZE,
    run_id: str | None = None
) -> str:
    """Read the content of a text file with UTF-8 encoding.

    Args:
        file_path: Path to the file to read.
        max_size: Maximum allowed file size in bytes. None disables the check.
        run_id: Optional identifier for tracing and logging purposes.

    Returns:
        str: Complete content of the file.

    Raises:
        FileSystemError: When the file is missing, too large, not UTF-8,
            or cannot be read.
    """
    start_time = time.time()
    path = Path(file_path)

    try:
        validate_file(path)

        if max_size is not None:
            size = path.stat().st_size
            if size > max_size:
                raise FileSystemError(
                    message=f"File too large ({size / (1024*1024):.1f}MB). Maximum size: {max_size / (1024*1024):.1f}MB",
                    path=str(path),
                    operation="read"
                )

        content = path.read_text(encoding='utf-8')

        logger.debug(
            "File read successfully",
            path=str(path),
            size_bytes=len(content),
            duration_ms=round((time.time() - start_time) * 1000, 2),
            run_id=run_id
        )
        return content

    except UnicodeError as e:
        logger.error("UTF-8 encoding error", path=str(path), error=str(e), run_id=run_id)
        raise FileSystemError(
            message="File must be UTF-8 encoded. Check file encoding and try again.",
            path=str(path),
            operation="read"
        )

    except FileSystemError:
        raise

    except Exception as e:
        logger.error("Unexpected error reading file", path=str(path), error=str(e), run_id=run_id)
        raise FileSystemError(
            message="Cannot read file. Verify file exists and has read permissions.",
            path=str(path),
            operation="read"
        )


def parse_yaml_text(content: str, source: str = "<string>") -> dict[str, Any]:
    """Parse YAML text into a dictionary.

    Args:
        content: YAML document text.
        source: Name used in error messages (usually the file path).

    Returns:
        dict: Parsed mapping, empty for an empty document.

    Raises:
        ConfigurationError: On YAML syntax errors (with the 1-based line
            number when available) or when the document is not a mapping.
    """
    try:
        data = yaml.safe_load(content)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, 'problem', None) or str(e)
        location = f" at line {line}" if line else ""
        logger.error("YAML parsing error", source=source, line=line, error=problem)
        raise ConfigurationError(
            message=f"Invalid YAML syntax in {source}{location}: {problem}",
            source=source,
            line=line
        )

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(
            message=f"{source} must contain a YAML mapping. Found: {type(data).__name__}",
            source=source,
            line=1
        )
    return data


def read_yaml_file(
    file_path: str | Path,
    max_size: int | None = MAX_FILE_SIZE,
    run_id: str | None = None
) -> dict[str, Any]:
    """Read and parse a YAML file.

    Args:
        file_path: Path to the YAML file to read.
        max_size: Maximum allowed file size in bytes. None disables the check.
        run_id: Optional identifier for tracing and logging purposes.

    Returns:
        dict: Parsed YAML mapping; empty if the file is empty.

    Raises:
        FileSystemError: If file access fails
        ConfigurationError: On invalid YAML syntax or a non-mapping document

    Example:
        >>> data = read_yaml_file("configs/two_disks.yaml")
        >>> data["grid"]["n_phi"]
        360
    """
    start_time = time.time()
    path = Path(file_path)

    content = read_text_file(path, max_size, run_id)
    data = parse_yaml_text(content, source=str(path))

    logger.debug(
        "YAML parsed successfully",
        path=str(path),
        items=len(data),
        duration_ms=round((time.time() - start_time) * 1000, 2),
        run_id=run_id
    )
    return data
