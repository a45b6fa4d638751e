"""File and Directory Validation Module

Validates file system paths before phantom, config, sinogram and image
files are read, and prepares output directories before a run writes into
them.

Public Functions:
    validate_file: Validates existence and accessibility of a file
    ensure_output_directory: Creates an output directory and checks it is writable
"""

from pathlib import Path

from .exceptions import FileSystemError
from .logger import get_logger

logger = get_logger(__name__)


def validate_file(file_path: str | Path, required: bool = True) -> bool:
    """Validate that a file exists and is accessible.

    Args:
        file_path: Path to the file to validate. Relative paths are resolved
            against the current working directory.
        required: If True, raises FileSystemError when file doesn't exist.
            If False, returns False for missing files without raising errors.

    Returns:
        bool: True if file exists and is readable, False if it doesn't exist
            and required=False.

    Raises:
        FileSystemError: When the file is missing (required=True), is not a
            regular file, or cannot be opened for reading.

    Logs:
        WARNING: Required file not found
        ERROR: Permission denied or OS-level errors

    Example:
        >>> validate_file("phantoms/two_disks.yaml")
        True
        >>> validate_file("missing.raw", required=False)
        False
    """
    path = Path(file_path).resolve()
    try:
        if not path.is_file():
            if not required:
                return False

            logger.warning("Required file not found", path=str(path))
            raise FileSystemError(
                message=f"File not found: '{path}'. Verify path is correct and file exists.",
                path=str(path),
                operation="access"
            )

        with path.open('rb'):
            pass

        return True

    except PermissionError as e:
        logger.error("Permission denied", path=str(path), error=str(e))
        raise FileSystemError(
            message=f"Cannot read '{path}'. Check file permissions and ownership.",
            path=str(path),
            operation="read",
            error_code=getattr(e, 'errno', None)
        )

    except FileSystemError:
        raise

    except OSError as e:
        logger.error("File system error", path=str(path), error=str(e))
        raise FileSystemError(
            message=f"File system error for '{path}'. {e}",
            path=str(path),
            operation="access",
            error_code=getattr(e, 'errno', None)
        )


def ensure_output_directory(dir_path: str | Path) -> Path:
    """Create an output directory if needed and verify it is writable.

    Args:
        dir_path: Directory that will receive run artifacts.

    Returns:
        Path: The resolved directory path.

    Raises:
        FileSystemError: If the path exists but is not a directory, or the
            directory cannot be created or written.
    """
    path = Path(dir_path).resolve()
    try:
        if path.exists() and not path.is_dir():
            raise FileSystemError(
                message=f"Output path '{path}' exists and is not a directory.",
                path=str(path),
                operation="create"
            )
        path.mkdir(parents=True, exist_ok=True)
        marker = path / '.write_test'
        marker.touch()
        marker.unlink()
        return path

    except FileSystemError:
        raise

    except OSError as e:
        logger.error("Cannot prepare output directory", path=str(path), error=str(e))
        raise FileSystemError(
            message=f"Cannot create or write to output directory '{path}': {e}",
            path=str(path),
            operation="create",
            error_code=getattr(e, 'errno', None)
        )
