"""Sampling Grid Models

Pydantic models for the two sampling domains: the parallel-beam sinogram
grid over (phi, s) and the square pixel grid over the field of view, plus
the value containers that travel between stages.

Conventions:
    Angles phi_k = -pi + (k + 1) * 2pi / n_phi, k = 0..n_phi-1 (last is pi)
    Offsets s_j = -s_max + j * h_s with h_s = 2 s_max / (n_s - 1)
    Pixel (i, j) has center x = -fov + (j + 0.5) pitch, y = fov - (i + 0.5) pitch

Public Classes:
    SinogramGrid: (phi, s) sampling
    ImageGrid: Square pixel sampling
    Sinogram: Values on a SinogramGrid
    RasterImage: Values on an ImageGrid
"""

import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .exceptions import DataValidationError, GridError


class SinogramGrid(BaseModel):
    """Uniform (phi, s) grid over the full rotation (-pi, pi]."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    n_phi: int = 360
    n_s: int = 512
    s_max: float = 1.5

    @model_validator(mode='after')
    def validate_sizes(self) -> 'SinogramGrid':
        if self.n_phi < 2:
            raise GridError(message=f"n_phi must be >= 2, got {self.n_phi}", field="n_phi", constraint="min_size")
        if self.n_s < 2:
            raise GridError(message=f"n_s must be >= 2, got {self.n_s}", field="n_s", constraint="min_size")
        if not self.s_max > 0:
            raise GridError(message=f"s_max must be > 0, got {self.s_max}", field="s_max", constraint="positive")
        return self

    @property
    def h_s(self) -> float:
        return 2.0 * self.s_max / (self.n_s - 1)

    @property
    def h_phi(self) -> float:
        return 2.0 * math.pi / self.n_phi

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_phi, self.n_s

    def angles(self) -> np.ndarray:
        return -math.pi + (np.arange(self.n_phi) + 1) * self.h_phi

    def offsets(self) -> np.ndarray:
        return -self.s_max + np.arange(self.n_s) * self.h_s

    def check_contains(self, fov: float) -> None:
        """Require the detector to cover the whole field of view.

        Raises:
            GridError: If s_max < fov * sqrt(2)
        """
        if self.s_max < fov * math.sqrt(2.0) * (1.0 - 1e-12):
            raise GridError(
                message=f"s_max={self.s_max} does not contain the field of view: "
                        f"s_max must be >= fov*sqrt(2) = {fov * math.sqrt(2.0):.6f}",
                field="s_max",
                constraint="containment"
            )

    def nearest_node(self, phi: float, s: float) -> tuple[int, int]:
        """Indices (k, j) of the grid node nearest to (phi, s).

        Raises:
            GridError: If s lies outside [-s_max, s_max]
        """
        if abs(s) > self.s_max + 0.5 * self.h_s:
            raise GridError(
                message=f"Offset s={s} lies outside the detector [-{self.s_max}, {self.s_max}]",
                field="s",
                constraint="on_grid"
            )
        k = int(round((phi + math.pi) / self.h_phi)) - 1
        j = int(round((s + self.s_max) / self.h_s))
        return k % self.n_phi, min(max(j, 0), self.n_s - 1)


class ImageGrid(BaseModel):
    """Square n x n pixel grid over [-fov, fov]^2."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    n: int = 256
    fov: float = 1.0

    @model_validator(mode='after')
    def validate_sizes(self) -> 'ImageGrid':
        if self.n < 2:
            raise GridError(message=f"n must be >= 2, got {self.n}", field="n", constraint="min_size")
        if not self.fov > 0:
            raise GridError(message=f"fov must be > 0, got {self.fov}", field="fov", constraint="positive")
        return self

    @property
    def pitch(self) -> float:
        return 2.0 * self.fov / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.n

    def x_coords(self) -> np.ndarray:
        """Column-center x coordinates, left to right."""
        return -self.fov + (np.arange(self.n) + 0.5) * self.pitch

    def y_coords(self) -> np.ndarray:
        """Row-center y coordinates, top to bottom."""
        return self.fov - (np.arange(self.n) + 0.5) * self.pitch

    def points(self) -> np.ndarray:
        """Pixel centers as an (n, n, 2) array indexed [row, col]."""
        xx, yy = np.meshgrid(self.x_coords(), self.y_coords())
        return np.stack([xx, yy], axis=-1)

    def to_index(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Fractional (row, col) indices of points, pixel centers at integers."""
        col = (np.asarray(x) + self.fov) / self.pitch - 0.5
        row = (self.fov - np.asarray(y)) / self.pitch - 0.5
        return row, col


def _coerce_values(value: Any) -> np.ndarray:
    return np.array(value, dtype=float)


class Sinogram(BaseModel):
    """Sinogram values laid out angle-major, shape (n_phi, n_s)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: SinogramGrid
    values: np.ndarray
    metadata: dict[str, Any] = Field(default_factory=dict)

    @field_validator('values', mode='before')
    @classmethod
    def coerce_values(cls, value: Any) -> np.ndarray:
        return _coerce_values(value)

    @model_validator(mode='after')
    def validate_shape(self) -> 'Sinogram':
        if self.values.shape != self.grid.shape:
            raise GridError(
                message=f"Sinogram values have shape {self.values.shape}, grid expects {self.grid.shape}",
                field="values",
                constraint="shape"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataValidationError(
                message="Sinogram contains non-finite values",
                data_type="sinogram",
                constraint="finite"
            )
        return self

    def with_values(self, values: np.ndarray, **metadata: Any) -> 'Sinogram':
        """Same grid, new values; metadata is merged."""
        return Sinogram(grid=self.grid, values=values, metadata={**self.metadata, **metadata})

    @classmethod
    def zeros(cls, grid: SinogramGrid) -> 'Sinogram':
        return cls(grid=grid, values=np.zeros(grid.shape))


class RasterImage(BaseModel):
    """Image values row-major, shape (n, n), row 0 at the top."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: ImageGrid
    values: np.ndarray
    metadata: dict[str, Any] = Field(default_factory=dict)

    @field_validator('values', mode='before')
    @classmethod
    def coerce_values(cls, value: Any) -> np.ndarray:
        return _coerce_values(value)

    @model_validator(mode='after')
    def validate_shape(self) -> 'RasterImage':
        if self.values.shape != self.grid.shape:
            raise GridError(
                message=f"Image values have shape {self.values.shape}, grid expects {self.grid.shape}",
                field="values",
                constraint="shape"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataValidationError(
                message="Image contains non-finite values",
                data_type="image",
                constraint="finite"
            )
        return self

    def with_values(self, values: np.ndarray, **metadata: Any) -> 'RasterImage':
        return RasterImage(grid=self.grid, values=values, metadata={**self.metadata, **metadata})
