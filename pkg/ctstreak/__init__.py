from .api import (
    load_config,
    load_phantom,
    simulate,
    reconstruct,
    predict,
    score,
    reduce_metal_artifacts,
    run,
    verify,
    set_logs
)

from .core.exceptions import (
    # Base exceptions
    CTStreakError,
    SystemError,
    ValidationError,
    ProcessingError,

    # Specific exceptions
    FileSystemError,
    ConfigurationError,
    GeometryError,
    GridError,
    DataValidationError,
    SolverError,
    PipelineError,
    ExecutionError
)

__all__ = [
    # API Methods
    'load_config',
    'load_phantom',
    'simulate',
    'reconstruct',
    'predict',
    'score',
    'reduce_metal_artifacts',
    'run',
    'verify',
    'set_logs',

    # Base Exceptions
    'CTStreakError',
    'SystemError',
    'ValidationError',
    'ProcessingError',

    # Specific Exceptions
    'FileSystemError',
    'ConfigurationError',
    'GeometryError',
    'GridError',
    'DataValidationError',
    'SolverError',
    'PipelineError',
    'ExecutionError'
]
