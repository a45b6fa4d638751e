"""Spectral Projection Module

Synthesises projection data under non-ideal physics: polychromatic beam
hardening of metals with a linear energy dependence, constant scatter over
the body support, and impulsive noise spikes. All models start from the
exact analytic projections of `radon`.

Beam hardening with a uniform spectrum on [E0 - delta, E0 + delta] and one
shared metal slope alpha has the closed form

    P = R f_E0 - g(alpha * delta * R chi_D),   g(x) = ln(sinh(x) / x)

which is what `polychromatic_project` evaluates. The binned path integrates
any discrete spectrum with per-primitive slopes in log-sum-exp form.

Public Classes:
    Spectrum: Uniform or binned energy window
    ScatterModel: Constant scatter intensity over the body projection
    NoiseSpikes: Impulses in the intensity domain

Public Functions:
    log_sinhc: g(x) = ln(sinh(x)/x), overflow-safe
    beam_hardening_trace: g applied to alpha*delta*R chi_D
    monochromatic_project: P = R f_E0
    polychromatic_project: Closed-form uniform-spectrum projection
    polychromatic_project_general: Binned-spectrum projection
    scatter_project: Projection with additive scatter
    noisy_project: Projection with noise spikes
"""

import math
import time
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import logsumexp

from .exceptions import DataValidationError, GeometryError
from .grid_models import Sinogram, SinogramGrid
from .logger import get_logger
from .phantom_models import Phantom
from .radon import metal_projection, primitive_projection, radon_analytic

logger = get_logger(__name__)


SERIES_CUTOFF = 1e-4
ASYMPTOTIC_CUTOFF = 700.0
WEIGHT_SUM_TOL = 1e-12
# Angle rows processed per log-sum-exp block
_ROW_BLOCK = 32


def log_sinhc(x: np.ndarray | float) -> np.ndarray | float:
    """g(x) = ln(sinh(x)/x), even in x, with g(0) = 0.

    Uses the series x^2/6 - x^4/180 for |x| < 1e-4 and the asymptotic form
    |x| - ln(2|x|) + ln(1 - e^(-2|x|)) for |x| > 700.
    """
    scalar = np.ndim(x) == 0
    ax = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
    out = np.empty_like(ax)
    small = ax < SERIES_CUTOFF
    large = ax > ASYMPTOTIC_CUTOFF
    mid = ~(small | large)

    sq = ax[small] ** 2
    out[small] = sq / 6.0 - sq * sq / 180.0
    out[large] = ax[large] - np.log(2.0 * ax[large]) + np.log1p(-np.exp(-2.0 * ax[large]))
    out[mid] = np.log(np.sinh(ax[mid]) / ax[mid])
    return float(out[0]) if scalar else out


def beam_hardening_trace(metal_sino: Sinogram, alpha_delta: float) -> Sinogram:
    """Beam-hardening trace g(alpha*delta * R chi_D) on a metal sinogram.

    Args:
        metal_sino: R chi_D, non-negative
        alpha_delta: Product of the metal slope and the spectrum half-width

    Returns:
        Sinogram: The trace; zero wherever the ray misses the metal

    Raises:
        DataValidationError: If alpha_delta is zero or not finite, or the
            metal sinogram has negative entries
    """
    if not math.isfinite(alpha_delta) or alpha_delta == 0.0:
        raise DataValidationError(
            message=f"alpha_delta must be finite and nonzero, got {alpha_delta}",
            data_type="spectrum",
            constraint="alpha_delta",
            value=alpha_delta
        )
    if np.any(metal_sino.values < -1e-12):
        raise DataValidationError(
            message="Metal sinogram must be non-negative",
            data_type="sinogram",
            constraint="non_negative",
            value=float(metal_sino.values.min())
        )
    trace = log_sinhc(alpha_delta * metal_sino.values)
    return metal_sino.with_values(trace, kind='trace', alpha_delta=alpha_delta)


class Spectrum(BaseModel):
    """Energy window [E0 - delta, E0 + delta].

    The uniform model uses eta = 1/(2 delta); delta = 0 means monochromatic.
    The binned model carries quadrature nodes `energies` with positive
    `weights` (eta_i * dE_i) summing to one.
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    e0: float = 0.06
    delta: float = 0.02
    model: Literal['uniform', 'binned'] = 'uniform'
    energies: list[float] = Field(default_factory=list)
    weights: list[float] = Field(default_factory=list)

    @model_validator(mode='after')
    def validate_window(self) -> 'Spectrum':
        if not self.delta >= 0:
            raise DataValidationError(
                message=f"Spectrum delta must be >= 0, got {self.delta}",
                data_type="spectrum",
                constraint="delta",
                value=self.delta
            )
        if self.model == 'binned':
            if not self.energies or len(self.energies) != len(self.weights):
                raise DataValidationError(
                    message="Binned spectrum needs matching, nonempty energies and weights",
                    data_type="spectrum",
                    constraint="bins"
                )
            if any(not w > 0 for w in self.weights):
                raise DataValidationError(
                    message="Every spectrum bin weight must be > 0",
                    data_type="spectrum",
                    constraint="positive_weights",
                    value=min(self.weights)
                )
            total = math.fsum(self.weights)
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                raise DataValidationError(
                    message=f"Spectrum bin weights must sum to 1, got {total!r}",
                    data_type="spectrum",
                    constraint="normalized",
                    value=total
                )
        return self

    @property
    def is_monochromatic(self) -> bool:
        return self.model == 'uniform' and self.delta == 0.0

    @classmethod
    def uniform(cls, e0: float, delta: float) -> 'Spectrum':
        return cls(e0=e0, delta=delta, model='uniform')

    @classmethod
    def binned(
        cls,
        e0: float,
        energies: list[float],
        weights: list[float],
        delta: float | None = None
    ) -> 'Spectrum':
        """Binned spectrum from nodes and weights; weights are renormalised."""
        total = math.fsum(weights)
        if not total > 0:
            raise DataValidationError(
                message="Spectrum weights must have a positive sum",
                data_type="spectrum",
                constraint="positive_weights"
            )
        if delta is None:
            delta = max(abs(e - e0) for e in energies)
        return cls(
            e0=e0,
            delta=delta,
            model='binned',
            energies=[float(e) for e in energies],
            weights=[w / total for w in weights]
        )

    @classmethod
    def binned_uniform(
        cls,
        e0: float,
        delta: float,
        n_bins: int = 101,
        rule: Literal['midpoint', 'simpson'] = 'simpson'
    ) -> 'Spectrum':
        """Discretise the uniform window with the midpoint or Simpson rule.

        Raises:
            DataValidationError: On delta <= 0, too few bins, or an even bin
                count for Simpson's rule
        """
        if not delta > 0:
            raise DataValidationError(
                message="Binned uniform spectrum needs delta > 0",
                data_type="spectrum",
                constraint="delta",
                value=delta
            )
        if rule == 'midpoint':
            if n_bins < 1:
                raise DataValidationError(message="n_bins must be >= 1", data_type="spectrum", constraint="n_bins")
            width = 2.0 * delta / n_bins
            energies = e0 - delta + (np.arange(n_bins) + 0.5) * width
            weights = np.full(n_bins, 1.0 / n_bins)
        else:
            if n_bins < 3 or n_bins % 2 == 0:
                raise DataValidationError(
                    message=f"Simpson's rule needs an odd n_bins >= 3, got {n_bins}",
                    data_type="spectrum",
                    constraint="n_bins",
                    value=n_bins
                )
            energies = np.linspace(e0 - delta, e0 + delta, n_bins)
            weights = np.ones(n_bins)
            weights[1:-1:2] = 4.0
            weights[2:-1:2] = 2.0
        return cls.binned(e0, energies.tolist(), weights.tolist(), delta=delta)


class ScatterModel(BaseModel):
    """Constant scatter intensity c added on Q = {R chi_D0 > 0}."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    c: float = 0.01

    @model_validator(mode='after')
    def validate_intensity(self) -> 'ScatterModel':
        if not self.c > 0:
            raise DataValidationError(
                message=f"Scatter intensity c must be > 0, got {self.c}",
                data_type="scatter",
                constraint="positive",
                value=self.c
            )
        return self

    def support(self, phantom: Phantom, grid: SinogramGrid) -> np.ndarray:
        """Boolean mask of Q from the phantom's hull primitive.

        Raises:
            GeometryError: If no background primitive is flagged as hull
        """
        hull = phantom.hull
        if hull is None:
            raise GeometryError(
                message="Scatter needs a convex hull primitive: flag one background primitive with hull: true",
                constraint="hull"
            )
        return primitive_projection(hull, grid).values > 0


class NoiseSpikes(BaseModel):
    """Intensity impulses (phi_k, s_k, c_k) with c_k > 0."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    spikes: list[tuple[float, float, float]] = Field(default_factory=list)
    seed: int | None = None

    @model_validator(mode='after')
    def validate_spikes(self) -> 'NoiseSpikes':
        for phi, s, c in self.spikes:
            if not c > 0:
                raise DataValidationError(
                    message=f"Spike amplitude must be > 0, got {c} at (phi={phi}, s={s})",
                    data_type="noise",
                    constraint="positive",
                    value=c
                )
        return self

    @classmethod
    def generate(
        cls,
        grid: SinogramGrid,
        count: int,
        lam: float = 4.0,
        gain: float = 1e-4,
        seed: int = 0,
        s_limit: float | None = None
    ) -> 'NoiseSpikes':
        """Draw `count` spikes on distinct grid nodes.

        Nodes are uniform over all angles and the offsets with |s| <= s_limit;
        amplitudes are max(Poisson(lam), 1) * gain. Identical arguments give
        identical spikes.

        Raises:
            DataValidationError: If there are fewer eligible nodes than `count`
        """
        s = grid.offsets()
        limit = grid.s_max if s_limit is None else s_limit
        columns = np.flatnonzero(np.abs(s) <= limit)
        total = grid.n_phi * len(columns)
        if count < 0 or count > total:
            raise DataValidationError(
                message=f"Cannot place {count} spikes on {total} eligible nodes",
                data_type="noise",
                constraint="count",
                value=count
            )
        rng = np.random.default_rng(seed)
        nodes = rng.choice(total, size=count, replace=False)
        amplitudes = np.maximum(rng.poisson(lam, size=count), 1) * gain
        angles = grid.angles()
        spikes = [
            (float(angles[node // len(columns)]), float(s[columns[node % len(columns)]]), float(amp))
            for node, amp in zip(nodes, amplitudes)
        ]
        return cls(spikes=spikes, seed=seed)


def monochromatic_project(phantom: Phantom, grid: SinogramGrid) -> Sinogram:
    """Ideal data P = R f_E0."""
    rf = radon_analytic(phantom, grid)
    return rf.with_values(rf.values, kind='monochromatic')


def polychromatic_project(
    phantom: Phantom,
    spectrum: Spectrum,
    grid: SinogramGrid,
    alpha_delta: float | None = None
) -> Sinogram:
    """Closed-form beam-hardened projection for a uniform spectrum.

    P = R f_E0 - g(alpha * delta * R chi_D) with one slope alpha shared by
    every metal primitive.

    Args:
        phantom: Phantom whose metal primitives share one alpha
        spectrum: Uniform spectrum with delta > 0
        grid: Sinogram grid
        alpha_delta: Replaces the phantom's alpha * delta when given

    Returns:
        Sinogram: Polychromatic data

    Raises:
        DataValidationError: If delta = 0 or the spectrum is binned
        GeometryError: If metal slopes differ

    Example:
        >>> p = polychromatic_project(phantom, Spectrum.uniform(0.06, 0.02), grid)
    """
    start_time = time.time()
    if spectrum.model != 'uniform':
        raise DataValidationError(
            message="polychromatic_project needs a uniform spectrum; use polychromatic_project_general",
            data_type="spectrum",
            constraint="uniform"
        )
    if spectrum.delta == 0.0:
        raise DataValidationError(
            message="Spectrum delta is 0: use the monochromatic path (P = R f_E0)",
            data_type="spectrum",
            constraint="delta",
            value=0.0
        )

    rf = radon_analytic(phantom, grid)
    if not phantom.metals:
        logger.warning("Phantom has no metal; polychromatic data equal R f_E0", phantom=phantom.name)
        return rf.with_values(rf.values, kind='polychromatic')

    if alpha_delta is None:
        alpha_delta = phantom.alpha_delta(spectrum.delta)
    trace = beam_hardening_trace(metal_projection(phantom, grid), alpha_delta)

    logger.debug(
        "Polychromatic projection complete",
        alpha_delta=alpha_delta,
        max_trace=float(trace.values.max()),
        duration_ms=round((time.time() - start_time) * 1000, 2)
    )
    return rf.with_values(rf.values - trace.values, kind='polychromatic', alpha_delta=alpha_delta)


def polychromatic_project_general(phantom: Phantom, spectrum: Spectrum, grid: SinogramGrid) -> Sinogram:
    """Projection for a binned spectrum with per-primitive metal slopes.

    P = -ln sum_i w_i exp(-R f_E0 - sum_j alpha_j (E_i - E0) R chi_Dj),
    evaluated with log-sum-exp over the bins.

    Raises:
        DataValidationError: If the spectrum is not binned
    """
    start_time = time.time()
    if spectrum.model != 'binned':
        raise DataValidationError(
            message="polychromatic_project_general needs a binned spectrum",
            data_type="spectrum",
            constraint="binned"
        )

    rf = radon_analytic(phantom, grid)
    slope = np.zeros(grid.shape)
    for prim, alpha in phantom.metal_primitives():
        slope += alpha * primitive_projection(prim, grid).values

    shifts = np.asarray(spectrum.energies) - spectrum.e0
    weights = np.asarray(spectrum.weights)
    log_mean = np.empty(grid.shape)
    for r0 in range(0, grid.n_phi, _ROW_BLOCK):
        block = slope[r0:r0 + _ROW_BLOCK]
        exponents = -shifts[:, None, None] * block[None, :, :]
        log_mean[r0:r0 + _ROW_BLOCK] = logsumexp(exponents, axis=0, b=weights[:, None, None])

    logger.debug(
        "Binned polychromatic projection complete",
        bins=len(weights),
        duration_ms=round((time.time() - start_time) * 1000, 2)
    )
    return rf.with_values(rf.values - log_mean, kind='polychromatic', bins=len(weights))


def scatter_project(phantom: Phantom, scatter: ScatterModel, grid: SinogramGrid) -> Sinogram:
    """Monochromatic data with scatter: P = -ln(exp(-R f_E0) + c chi_Q).

    Raises:
        DataValidationError: If the phantom is not declared piecewise constant
        GeometryError: If the phantom has no hull primitive

    Logs:
        WARNING: c >= 1 (scatter above the unattenuated beam)
    """
    if not phantom.piecewise_constant:
        raise DataValidationError(
            message=f"Scatter model needs a piecewise-constant phantom ('{phantom.name}' is not)",
            data_type="phantom",
            constraint="piecewise_constant"
        )
    if scatter.c >= 1.0:
        logger.warning("Scatter intensity exceeds the unattenuated beam", c=scatter.c)

    rf = radon_analytic(phantom, grid)
    q = scatter.support(phantom, grid)
    values = rf.values.copy()
    values[q] = -np.logaddexp(-rf.values[q], math.log(scatter.c))
    logger.debug("Scatter projection complete", c=scatter.c, support_fraction=round(float(q.mean()), 4))
    return rf.with_values(values, kind='scatter', scatter_c=scatter.c)


def noisy_project(phantom: Phantom, spikes: NoiseSpikes, grid: SinogramGrid) -> Sinogram:
    """Monochromatic data with intensity impulses.

    Each spike adds c_k / (h_phi * h_s) to the intensity exp(-R f_E0) at the
    nearest grid node; every other node keeps P = R f_E0 exactly.

    Raises:
        GridError: If a spike lies outside the detector
        DataValidationError: If two spikes land on the same node
    """
    rf = radon_analytic(phantom, grid)
    values = rf.values.copy()
    scale = 1.0 / (grid.h_phi * grid.h_s)
    taken: dict[tuple[int, int], tuple[float, float]] = {}
    for phi, s, c in spikes.spikes:
        node = grid.nearest_node(phi, s)
        if node in taken:
            raise DataValidationError(
                message=f"Spikes at {taken[node]} and {(phi, s)} fall on the same grid node {node}",
                data_type="noise",
                constraint="distinct_nodes",
                value=node
            )
        taken[node] = (phi, s)
        k, j = node
        values[k, j] = -math.log(math.exp(-rf.values[k, j]) + c * scale)
    logger.debug("Noise projection complete", spikes=len(spikes.spikes))
    return rf.with_values(values, kind='noise', spikes=len(spikes.spikes))
