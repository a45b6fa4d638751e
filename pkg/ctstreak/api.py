"""Public API Module

Provides the main public interface for simulating metal streak artifacts,
predicting streak lines from phantom geometry, scoring them in
reconstructions and running the full configuration-driven pipeline.

Public Functions:
    load_config: Load and validate a pipeline configuration file
    load_phantom: Load a phantom file or a built-in phantom
    simulate: Projection data for a phantom under a configuration
    reconstruct: Filtered backprojection of a sinogram
    predict: Predicted streak lines for a phantom and physics mode
    score: Score predicted lines in a reconstruction against controls
    reduce_metal_artifacts: Linear or Poisson sinogram completion
    run: Run the full pipeline
    verify: Check a run directory against its manifest
    set_logs: Configure logging settings and location
"""

from pathlib import Path
from typing import Literal

from .core.artifact import StreakMode, StreakReport, build_exclusion_mask, predict_streaks, validate_prediction
from .core.config_loader import parse_config
from .core.config_models import PipelineConfig
from .core.exceptions import ConfigurationError, FileSystemError
from .core.geometry import StreakLine
from .core.grid_models import ImageGrid, RasterImage, Sinogram
from .core.logger import LogLevel, configure_logging, get_logger
from .core.mar import mar_linear, mar_poisson, metal_trace
from .core.phantom_loader import resolve_phantom
from .core.phantom_models import Phantom
from .core.pipeline import RunResult, project, run_pipeline, verify_manifest
from .core.radon import fbp, metal_projection
from .core.spectral import NoiseSpikes

logger = get_logger(__name__)


def load_config(path: str | Path) -> PipelineConfig:
    """Load a pipeline configuration file.

    Raises:
        FileSystemError: When the file cannot be read
        ConfigurationError: On syntax errors (with line number), unknown keys
            or invalid values

    Example:
        >>> config = load_config("configs/two_disks.yaml")
        >>> config.grid.n_phi
        360
    """
    return parse_config(path)


def load_phantom(reference: str | Path, base_dir: str | Path | None = None) -> Phantom:
    """Load a phantom from a YAML file or `builtin:<name>`.

    Example:
        >>> phantom = load_phantom("builtin:two_disks")
    """
    return resolve_phantom(str(reference), base_dir=base_dir)


def simulate(
    phantom: Phantom,
    config: PipelineConfig,
    spikes: NoiseSpikes | None = None
) -> tuple[Sinogram, NoiseSpikes | None]:
    """Projection data under the configuration's physics block.

    Returns:
        tuple: (sinogram, the noise spikes used or None)
    """
    return project(phantom, config, spikes=spikes)


def reconstruct(sinogram: Sinogram, n: int = 256, fov: float = 1.0, threads: int = 1) -> RasterImage:
    """Filtered backprojection onto an n x n grid over [-fov, fov]^2."""
    return fbp(sinogram, ImageGrid(n=n, fov=fov), threads=threads)


def predict(phantom: Phantom, mode: StreakMode = 'beam-hardening', spikes: NoiseSpikes | None = None) -> list[StreakLine]:
    """Predicted streak lines for a physics mode.

    Example:
        >>> lines = predict(load_phantom("builtin:two_disks"))
        >>> len(lines)
        4
    """
    return predict_streaks(phantom, mode, spikes=spikes)


def score(
    image: RasterImage,
    lines: list[StreakLine],
    phantom: Phantom | None = None,
    n_controls: int = 200,
    seed: int = 0,
    theta: float = 2.0,
    sigma: float = 2.0,
    metal_dilation: int = 3,
    edge_band: int = 2
) -> StreakReport:
    """Score predicted lines against random control lines.

    When a phantom is given, pixels near metal and near f_E0 edges are
    excluded from scoring.
    """
    mask = build_exclusion_mask(phantom, image.grid, metal_dilation, edge_band) if phantom is not None else None
    return validate_prediction(image, lines, mask, n_controls=n_controls, seed=seed, theta=theta, sigma=sigma)


def reduce_metal_artifacts(
    sinogram: Sinogram,
    phantom: Phantom,
    method: Literal['linear', 'poisson'] = 'linear',
    tau_m: float | None = None,
    zeta_quantile: float = 0.9
) -> Sinogram:
    """Complete the metal trace of `sinogram` using the phantom's metal projection.

    The Poisson fill runs with the metal guard on.
    """
    metal = metal_projection(phantom, sinogram.grid)
    trace = metal_trace(metal, tau_m=tau_m)
    if method == 'poisson':
        return mar_poisson(sinogram, trace, zeta_quantile=zeta_quantile, metal_sino=metal)
    return mar_linear(sinogram, trace)


def run(
    config: PipelineConfig | str | Path,
    out_dir: str | Path | None = None,
    seed: int | None = None,
    threads: int | None = None
) -> RunResult:
    """Run the full pipeline from a configuration object or file.

    Example:
        >>> result = run("configs/two_disks.yaml", out_dir="out/two_disks")
        >>> result.predicted_lines
        4
    """
    if not isinstance(config, PipelineConfig):
        config = parse_config(config)
    return run_pipeline(config, out_dir=out_dir, seed=seed, threads=threads)


def verify(out_dir: str | Path) -> list[str]:
    """Problems found when re-checking a run directory; empty when it verifies."""
    return verify_manifest(out_dir)


def set_logs(
    path: str | Path | None = None,
    console_level: LogLevel = 'INFO',
    file_level: LogLevel = 'DEBUG',
    rotation: str = '10 MB',
    retention: str = '1 week'
) -> None:
    """Set logging configuration for ctstreak.

    Args:
        path: Directory for the 'ctstreak.log' file. None logs to the
            console only.
        console_level: Minimum level for console logging. Default: 'INFO'
        file_level: Minimum level for file logging. Default: 'DEBUG'
        rotation: When to rotate log files, e.g. '10 MB' or '1 day'
        retention: How long to keep old log files, e.g. '1 week'

    Raises:
        FileSystemError: When the directory cannot be accessed or created
        ConfigurationError: When log settings are invalid

    Example:
        >>> set_logs("./logs", console_level="WARNING")
    """
    try:
        configure_logging(
            log_dir=Path(path) if path is not None else None,
            console_level=console_level,
            file_level=file_level,
            rotation=rotation,
            retention=retention
        )
    except (FileSystemError, ConfigurationError):
        raise
    except Exception as e:
        raise ConfigurationError(
            message=f"Failed to configure logging: {str(e)}",
            source="logging",
            config_key="configuration"
        )
