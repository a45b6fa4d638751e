"""Phantom File Loading Module

Reads and writes phantom description files. A phantom file is a YAML
mapping with `name`, `fov`, `piecewise_constant`, a `background` list of
primitive entries and a `metals` list of regions whose primitive entries
carry their spectral slope as an `alpha` key.

Public Functions:
    load_phantom: Load and validate a phantom file
    resolve_phantom: Phantom from a path or a `builtin:<name>` reference
    phantom_to_dict: Phantom as a file-grammar mapping
    dump_phantom: Phantom as YAML text
    write_phantom: Write a phantom file
"""

import time
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from .config_models import BUILTIN_PREFIX
from .exceptions import ConfigurationError, CTStreakError, FileSystemError
from .file_reader import read_yaml_file
from .file_validator import ensure_output_directory
from .logger import get_logger
from .phantom_library import builtin_phantom
from .phantom_models import Phantom

logger = get_logger(__name__)


def load_phantom(file_path: str | Path, run_id: str | None = None) -> Phantom:
    """Load and validate a phantom file.

    Args:
        file_path: Phantom YAML file
        run_id: Optional identifier for tracing

    Returns:
        Phantom: Validated phantom

    Raises:
        FileSystemError: File missing or unreadable
        ConfigurationError: YAML syntax error or a schema violation (the
            message names the field path)
        GeometryError: Invalid primitive geometry, a primitive outside the
            field of view, or a metal slope that is not negative

    Logs:
        INFO: Phantom loaded with primitive and region counts
        ERROR: Schema validation failures

    Example:
        >>> phantom = load_phantom("configs/phantoms/two_disks.yaml")
        >>> len(phantom.metals[0].primitives)
        2
    """
    start_time = time.time()
    path = Path(file_path)
    try:
        data = read_yaml_file(path, run_id=run_id)
        phantom = Phantom.model_validate(data)

        logger.info(
            "Phantom loaded",
            path=str(path),
            name=phantom.name,
            background=len(phantom.background),
            metal_regions=len(phantom.metals),
            duration_ms=round((time.time() - start_time) * 1000, 2),
            run_id=run_id
        )
        return phantom

    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first.get('loc', ()))
        logger.error("Phantom validation failed", path=str(path), errors=e.errors(), run_id=run_id)
        raise ConfigurationError(
            message=f"Invalid phantom file {path} at '{field}': {first['msg']}",
            config_key=field,
            source=str(path)
        )

    except (FileSystemError, CTStreakError):
        raise

    except Exception as e:
        logger.error(
            "Unexpected phantom loading error",
            path=str(path),
            error=str(e),
            error_type=type(e).__name__,
            run_id=run_id
        )
        raise ConfigurationError(message=f"Failed to load phantom {path}: {e}", source=str(path))


def resolve_phantom(reference: str, base_dir: str | Path | None = None, run_id: str | None = None) -> Phantom:
    """Phantom from `builtin:<name>` or a file path relative to `base_dir`."""
    if reference.startswith(BUILTIN_PREFIX):
        return builtin_phantom(reference[len(BUILTIN_PREFIX):])
    path = Path(reference)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return load_phantom(path, run_id=run_id)


def _primitive_entry(prim: Any, alpha: float | None = None) -> dict[str, Any]:
    entry = {'kind': prim.kind, **prim.model_dump(mode='json', exclude={'kind', 'hull', 'value'})}
    entry['value'] = prim.value
    if alpha is not None:
        entry['alpha'] = alpha
    elif prim.hull:
        entry['hull'] = True
    return entry


def phantom_to_dict(phantom: Phantom) -> dict[str, Any]:
    """The phantom in file grammar, with inline metal slopes."""
    return {
        'name': phantom.name,
        'fov': phantom.fov,
        'piecewise_constant': phantom.piecewise_constant,
        'background': [_primitive_entry(p) for p in phantom.background],
        'metals': [
            {
                'label': region.label,
                'primitives': [_primitive_entry(p, a) for p, a in zip(region.primitives, region.alpha)],
            }
            for region in phantom.metals
        ],
    }


def dump_phantom(phantom: Phantom) -> str:
    return yaml.safe_dump(phantom_to_dict(phantom), sort_keys=False, default_flow_style=None)


def write_phantom(phantom: Phantom, file_path: str | Path) -> Path:
    """Write a phantom file that `load_phantom` reads back to an equal phantom.

    Raises:
        FileSystemError: If the file cannot be written
    """
    path = Path(file_path)
    ensure_output_directory(path.parent)
    try:
        path.write_text(dump_phantom(phantom), encoding='utf-8')
    except OSError as e:
        raise FileSystemError(
            message=f"Failed to write phantom file: {e}",
            path=str(path),
            operation="write",
            error_code=getattr(e, 'errno', None)
        )
    logger.debug("Phantom written", path=str(path), name=phantom.name)
    return path
