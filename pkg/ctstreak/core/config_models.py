"""Configuration Models

Defines Pydantic models for the pipeline configuration file: sampling
grids, the physics block (exactly one of spectrum, scatter or noise), the
artifact scorer, the MAR method and output settings. Unknown keys are
rejected everywhere.

Public Classes:
    GridConfig: Sinogram and image sampling parameters
    SpectrumConfig: Beam-hardening spectrum settings
    ScatterConfig: Scatter intensity settings
    NoiseConfig: Noise spike settings
    PhysicsConfig: The single physics mode of a run
    ArtifactConfig: Streak scoring settings
    MarConfig: Metal artifact reduction settings
    PipelineConfig: Complete pipeline configuration
"""

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from .exceptions import ConfigurationError, GridError
from .grid_models import ImageGrid, SinogramGrid


# Default configuration values
DEFAULT_DISPLAY_WINDOW = (-0.02, 0.04)
BUILTIN_PREFIX = "builtin:"

PhysicsMode = Literal['monochromatic', 'beam-hardening', 'scatter', 'noise']


class _Block(BaseModel):
    model_config = ConfigDict(extra='forbid')


class GridConfig(_Block):
    """Sampling grids for projections and images.

    Raises:
        ConfigurationError: If a grid is invalid or the detector does not
            contain the field of view (s_max < fov * sqrt(2))
    """
    n_phi: int = 360
    n_s: int = 512
    s_max: float = 1.5
    n: int = 256
    fov: float = 1.0

    @model_validator(mode='after')
    def validate_grids(self) -> 'GridConfig':
        try:
            self.sinogram_grid().check_contains(self.fov)
            self.image_grid()
        except GridError as e:
            raise ConfigurationError(
                message=f"Invalid grid ({e.constraint}): {e.message}",
                config_key=f"grid.{e.field}" if e.field else "grid",
                source="pipeline_config"
            )
        return self

    def sinogram_grid(self) -> SinogramGrid:
        return SinogramGrid(n_phi=self.n_phi, n_s=self.n_s, s_max=self.s_max)

    def image_grid(self) -> ImageGrid:
        return ImageGrid(n=self.n, fov=self.fov)


class SpectrumConfig(_Block):
    """Energy window; delta = 0 selects the monochromatic path.

    `alpha_delta`, when set, replaces the phantom's alpha * delta in the
    closed-form uniform path.
    """
    e0: float = 0.06
    delta: float = 0.02
    alpha_delta: float | None = None
    model: Literal['uniform', 'binned'] = 'uniform'
    n_bins: int = 101
    rule: Literal['midpoint', 'simpson'] = 'simpson'

    @model_validator(mode='after')
    def validate_window(self) -> 'SpectrumConfig':
        if not self.e0 > 0:
            raise ConfigurationError(message=f"e0 must be > 0, got {self.e0}", config_key="physics.spectrum.e0")
        if not self.delta >= 0:
            raise ConfigurationError(message=f"delta must be >= 0, got {self.delta}",
                                     config_key="physics.spectrum.delta")
        if self.alpha_delta is not None and self.alpha_delta == 0:
            raise ConfigurationError(message="alpha_delta must be nonzero when set",
                                     config_key="physics.spectrum.alpha_delta")
        return self


class ScatterConfig(_Block):
    c: float = 0.01

    @model_validator(mode='after')
    def validate_c(self) -> 'ScatterConfig':
        if not self.c > 0:
            raise ConfigurationError(message=f"Scatter c must be > 0, got {self.c}", config_key="physics.scatter.c")
        return self


class NoiseConfig(_Block):
    """Noise spikes: an explicit list of (phi, s, c) or seeded generation."""
    count: int = 3
    lam: float = 4.0
    gain: float = 1.0e-4
    seed: int = 0
    s_limit: float = 0.8
    spikes: list[tuple[float, float, float]] | None = None

    @model_validator(mode='after')
    def validate_generation(self) -> 'NoiseConfig':
        if self.count < 0:
            raise ConfigurationError(message=f"count must be >= 0, got {self.count}", config_key="physics.noise.count")
        if not self.lam > 0 or not self.gain > 0:
            raise ConfigurationError(message="lam and gain must be > 0", config_key="physics.noise")
        return self


class PhysicsConfig(_Block):
    """Exactly one physics block per run."""
    spectrum: SpectrumConfig | None = None
    scatter: ScatterConfig | None = None
    noise: NoiseConfig | None = None

    @model_validator(mode='after')
    def validate_single_mode(self) -> 'PhysicsConfig':
        given = [name for name in ('spectrum', 'scatter', 'noise') if getattr(self, name) is not None]
        if len(given) != 1:
            raise ConfigurationError(
                message=f"physics must contain exactly one of spectrum, scatter, noise (found: {given or 'none'})",
                config_key="physics",
                source="pipeline_config"
            )
        return self

    @property
    def mode(self) -> PhysicsMode:
        if self.spectrum is not None:
            return 'monochromatic' if self.spectrum.delta == 0 else 'beam-hardening'
        return 'scatter' if self.scatter is not None else 'noise'


class ArtifactConfig(_Block):
    theta: float = 2.0
    sigma: float = 2.0
    n_controls: int = 200
    seed: int = 0
    metal_dilation: int = 3
    edge_band: int = 2
    control_margin: float = 3.0

    @model_validator(mode='after')
    def validate_scoring(self) -> 'ArtifactConfig':
        if self.n_controls < 50:
            raise ConfigurationError(
                message=f"n_controls must be >= 50, got {self.n_controls}",
                config_key="artifact.n_controls"
            )
        if not self.theta > 0 or not self.sigma > 0:
            raise ConfigurationError(message="theta and sigma must be > 0", config_key="artifact")
        if self.metal_dilation < 0 or self.edge_band < 0:
            raise ConfigurationError(message="Mask dilations must be >= 0", config_key="artifact")
        return self


class MarConfig(_Block):
    method: Literal['linear', 'poisson', 'none'] = 'linear'
    tau_m: float | None = None
    zeta_quantile: float = 0.9
    edge_margin: int = 0
    metal_guard: bool = True
    metal_tolerance: float = 0.01
    rtol: float = 1.0e-10
    max_iter: int = 20000

    @model_validator(mode='after')
    def validate_solver(self) -> 'MarConfig':
        if not 0.0 <= self.zeta_quantile <= 1.0:
            raise ConfigurationError(
                message=f"zeta_quantile must lie in [0, 1], got {self.zeta_quantile}",
                config_key="mar.zeta_quantile"
            )
        if not self.metal_tolerance >= 0 or self.edge_margin < 0:
            raise ConfigurationError(message="metal_tolerance and edge_margin must be >= 0", config_key="mar")
        if not self.rtol > 0 or self.max_iter < 1:
            raise ConfigurationError(message="rtol must be > 0 and max_iter >= 1", config_key="mar")
        return self


class PipelineConfig(_Block):
    """Complete pipeline configuration.

    Args:
        phantom: Phantom YAML path (relative paths resolve against the
            config file's directory) or `builtin:<name>`
        grid: Sampling grids
        physics: Exactly one of spectrum, scatter, noise
        artifact: Streak scoring settings
        mar: MAR settings
        output_dir: Output directory (relative to the working directory)
        display_window: PGM/PNG display window (low, high)
        threads: Worker threads; None defers to CTSTREAK_THREADS or 1
        seed: When set, overrides both noise and artifact seeds

    Example:
        >>> config = PipelineConfig(phantom="builtin:two_disks", physics={"spectrum": {}})
    """
    phantom: str
    grid: GridConfig = Field(default_factory=GridConfig)
    physics: PhysicsConfig
    artifact: ArtifactConfig = Field(default_factory=ArtifactConfig)
    mar: MarConfig = Field(default_factory=MarConfig)
    output_dir: str = "out"
    display_window: tuple[float, float] = DEFAULT_DISPLAY_WINDOW
    threads: int | None = None
    seed: int | None = None

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @model_validator(mode='after')
    def validate_settings(self) -> 'PipelineConfig':
        low, high = self.display_window
        if not low < high:
            raise ConfigurationError(
                message=f"display_window must be increasing, got {self.display_window}",
                config_key="display_window"
            )
        if self.threads is not None and self.threads < 1:
            raise ConfigurationError(message=f"threads must be >= 1, got {self.threads}", config_key="threads")
        return self

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    def phantom_path(self) -> Path | None:
        """Resolved phantom file path, or None for a built-in phantom."""
        if self.phantom.startswith(BUILTIN_PREFIX):
            return None
        path = Path(self.phantom)
        return path if path.is_absolute() else self._base_dir / path

    def noise_seed(self) -> int:
        return self.seed if self.seed is not None else (self.physics.noise.seed if self.physics.noise else 0)

    def artifact_seed(self) -> int:
        return self.seed if self.seed is not None else self.artifact.seed
