"""Custom Exceptions

Defines the structured exception hierarchy used throughout ctstreak.
Each exception includes relevant contextual information to aid in debugging
and error handling.

Exception Hierarchy:
    CTStreakError
    ├── SystemError
    │   ├── FileSystemError
    │   └── ConfigurationError
    ├── ValidationError
    │   ├── GeometryError
    │   ├── GridError
    │   └── DataValidationError
    └── ProcessingError
        ├── SolverError
        ├── PipelineError
        └── ExecutionError
"""

from typing import Any


# Base Package Exception

class CTStreakError(Exception):
    """Base exception for all ctstreak errors."""

    def __init__(self, message: str, **kwargs):
        self.message = message
        self.details: dict[str, Any] = kwargs
        super().__init__(message)


# Level 1: Core Error Categories

class SystemError(CTStreakError):
    """Base for system-level errors including file system and configuration issues."""
    pass

class ValidationError(CTStreakError):
    """Base for validation and verification errors."""
    pass

class ProcessingError(CTStreakError):
    """Base for processing-related errors."""
    pass


# Level 2: System Errors

class FileSystemError(SystemError):
    """File system operation errors."""
    def __init__(self, message: str, path: str, operation: str, error_code: int | None = None):
        self.path = path
        self.operation = operation
        self.error_code = error_code
        super().__init__(message, path=path, operation=operation, error_code=error_code)

class ConfigurationError(SystemError):
    """Configuration-related errors."""
    def __init__(
        self,
        message: str,
        config_key: str | None = None,
        source: str | None = None,
        line: int | None = None
    ):
        self.config_key = config_key
        self.source = source
        self.line = line
        super().__init__(message, config_key=config_key, source=source, line=line)


# Level 2: Validation Errors

class GeometryError(ValidationError):
    """Invalid primitives, regions, or unsupported geometric queries."""
    def __init__(self, message: str, primitive: str | None = None, constraint: str | None = None):
        self.primitive = primitive
        self.constraint = constraint
        super().__init__(message, primitive=primitive, constraint=constraint)

class GridError(ValidationError):
    """Sampling grid violations such as support containment or shape mismatch."""
    def __init__(self, message: str, field: str | None = None, constraint: str | None = None):
        self.field = field
        self.constraint = constraint
        super().__init__(message, field=field, constraint=constraint)

class DataValidationError(ValidationError):
    """Data content validation errors."""
    def __init__(self, message: str, data_type: str, constraint: str | None = None, value: Any = None):
        self.data_type = data_type
        self.constraint = constraint
        self.value = value
        super().__init__(message, data_type=data_type, constraint=constraint, value=value)


# Level 2: Processing Errors

class SolverError(ProcessingError):
    """Iterative solver failures."""
    def __init__(self, message: str, solver: str, residual: float | None = None, iterations: int | None = None):
        self.solver = solver
        self.residual = residual
        self.iterations = iterations
        super().__init__(message, solver=solver, residual=residual, iterations=iterations)

class PipelineError(ProcessingError):
    """Pipeline stage failures."""
    def __init__(self, message: str, stage: str, cause: str | None = None):
        self.stage = stage
        self.cause = cause
        super().__init__(message, stage=stage, cause=cause)

class ExecutionError(ProcessingError):
    """Execution and runtime processing errors."""
    def __init__(self, message: str, operation: str, details: dict | None = None):
        self.operation = operation
        super().__init__(message, operation=operation, **(details or {}))
