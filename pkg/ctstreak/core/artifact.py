"""Metal Artifact Module

Splits a reconstruction into the artifact-free part and the metal artifact
image, evaluates the artifact's series expansion, predicts streak lines for
each physics model, and measures streaks in reconstructed images.

Streak measurement:
    The image is high-passed (image minus a Gaussian blur) and the mean
    |high-pass| is taken along the line, skipping pixels near metal and near
    true edges of f_E0. A line is detected when its score reaches `theta`
    times the median score of random control lines.

Public Classes:
    ArtifactDecomposition: f_CT = f_E0 recon + f_MA
    LineScore: A scored line
    StreakReport: Predicted lines, control statistics and verdicts

Public Functions:
    metal_artifact_image: f_MA from the beam-hardening trace
    decompose: Reconstruct and split data into f_E0 recon and f_MA
    fma_series: Truncated double-series evaluation of f_MA
    predict_streaks: Candidate streak lines for a physics mode
    build_exclusion_mask: Pixels ignored by the streak scorer
    high_pass: Image minus Gaussian blur
    streak_score: Mean high-pass magnitude along a line
    validate_prediction: Score predictions against random controls
"""

import math
import time
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.ndimage import binary_dilation, gaussian_filter, map_coordinates

from .exceptions import DataValidationError
from .geometry import StreakLine, canonical_line, enumerate_streak_candidates
from .grid_models import ImageGrid, RasterImage, Sinogram
from .logger import get_logger
from .phantom_models import Phantom
from .radon import backproject, fbp, ramp_filter, render_metal_mask
from .spectral import NoiseSpikes, beam_hardening_trace

logger = get_logger(__name__)


MIN_SCORE_SAMPLES = 20
MIN_CONTROLS = 50

StreakMode = Literal['beam-hardening', 'scatter', 'noise']


class ArtifactDecomposition(BaseModel):
    """f_ct = f_e0_recon + f_ma, with the largest pixel mismatch recorded."""

    model_config = ConfigDict(frozen=True)

    f_ct: RasterImage
    f_e0_recon: RasterImage
    f_ma: RasterImage
    max_linearity_residual: float


def metal_artifact_image(
    metal_sino: Sinogram,
    alpha_delta: float,
    image_grid: ImageGrid,
    threads: int = 1
) -> RasterImage:
    """f_MA = -(1/4pi) R* I^-1 g(alpha*delta * R chi_D).

    Args:
        metal_sino: R chi_D on the sinogram grid
        alpha_delta: Metal slope times spectrum half-width
        image_grid: Output pixel grid
        threads: Backprojection threads

    Returns:
        RasterImage: The metal artifact image; zero for an empty metal
    """
    if not np.any(metal_sino.values):
        return RasterImage(grid=image_grid, values=np.zeros(image_grid.shape), metadata={'kind': 'f_ma'})
    trace = beam_hardening_trace(metal_sino, alpha_delta)
    image = fbp(trace, image_grid, threads=threads)
    return image.with_values(-image.values, kind='f_ma')


def decompose(
    data: Sinogram,
    rf_e0: Sinogram,
    image_grid: ImageGrid,
    f_ma: RasterImage | None = None,
    threads: int = 1
) -> ArtifactDecomposition:
    """Reconstruct data and its artifact-free counterpart and split them.

    Args:
        data: Measured (non-ideal) projection data P
        rf_e0: Ideal data R f_E0 on the same grid
        image_grid: Output pixel grid
        f_ma: Precomputed artifact image; defaults to fbp(P - R f_E0)
        threads: Backprojection threads

    Returns:
        ArtifactDecomposition: The three images and the maximum of
            |f_ct - f_e0_recon - f_ma|
    """
    f_ct = fbp(data, image_grid, threads=threads)
    f_e0 = fbp(rf_e0, image_grid, threads=threads)
    if f_ma is None:
        f_ma = fbp(data.with_values(data.values - rf_e0.values), image_grid, threads=threads)
        f_ma = f_ma.with_values(f_ma.values, kind='f_ma')
    residual = float(np.max(np.abs(f_ct.values - f_e0.values - f_ma.values)))
    scale = float(np.max(np.abs(f_ct.values))) or 1.0
    logger.debug("Artifact decomposition", residual=residual, relative=residual / scale)
    return ArtifactDecomposition(f_ct=f_ct, f_e0_recon=f_e0, f_ma=f_ma, max_linearity_residual=residual)


def fma_series(
    metal_sino: Sinogram,
    alpha_delta: float,
    k_outer: int,
    n_inner: int,
    image_grid: ImageGrid,
    ordering: Literal['sinogram', 'image'] = 'sinogram',
    threads: int = 1
) -> RasterImage:
    """Truncated double series for f_MA.

    With x = alpha*delta * R chi_D the inner series is
    S = sum_{n=1..N} x^(2n) / (2n+1)!, and ln(sinh(x)/x) = ln(1 + S) is
    expanded as sum_{k=1..K} (-1)^(k+1)/k S^k.

    Orderings:
        sinogram: S^k is formed pointwise on the sinogram and each outer
            term is ramp-filtered and backprojected; converges to
            `metal_artifact_image`.
        image: each inner power is filtered and backprojected first and the
            outer powers are taken pixelwise on the resulting image.

    Raises:
        DataValidationError: If alpha*delta * max(R chi_D) > 1, or K, N < 1
    """
    if k_outer < 1 or n_inner < 1:
        raise DataValidationError(
            message=f"Series orders must be >= 1 (K={k_outer}, N={n_inner})",
            data_type="series",
            constraint="orders"
        )
    x_max = abs(alpha_delta) * float(metal_sino.values.max(initial=0.0))
    if x_max > 1.0 + 1e-12:
        raise DataValidationError(
            message=f"Series convergence guard violated: alpha*delta*max(R chi_D) = {x_max:.6f} > 1",
            data_type="series",
            constraint="convergence",
            value=x_max
        )
    if alpha_delta == 0.0 or x_max == 0.0:
        return RasterImage(grid=image_grid, values=np.zeros(image_grid.shape), metadata={'kind': 'f_ma_series'})

    def filtered_backprojection(values: np.ndarray) -> np.ndarray:
        return backproject(ramp_filter(metal_sino.with_values(values)), image_grid, threads=threads).values

    x = alpha_delta * metal_sino.values
    inner_terms = [x ** (2 * n) / math.factorial(2 * n + 1) for n in range(1, n_inner + 1)]
    out = np.zeros(image_grid.shape)

    if ordering == 'sinogram':
        inner = np.sum(inner_terms, axis=0)
        power = np.ones_like(inner)
        outer = np.zeros_like(inner)
        for k in range(1, k_outer + 1):
            power = power * inner
            outer += (-1) ** (k + 1) / k * power
        out = filtered_backprojection(outer)
    else:
        bracket = np.zeros(image_grid.shape)
        for term in inner_terms:
            bracket += filtered_backprojection(term)
        power = np.ones_like(bracket)
        for k in range(1, k_outer + 1):
            power = power * bracket
            out += (-1) ** (k + 1) / k * power

    return RasterImage(
        grid=image_grid,
        values=-out / (4.0 * math.pi),
        metadata={'kind': 'f_ma_series', 'ordering': ordering, 'k_outer': k_outer, 'n_inner': n_inner}
    )


def predict_streaks(
    phantom: Phantom,
    mode: StreakMode,
    spikes: NoiseSpikes | None = None
) -> list[StreakLine]:
    """Predict streak lines for a physics mode.

    Modes:
        beam-hardening: lines touching the metal boundary twice
        scatter: the same over every piecewise-constant subdomain (metal
            regions and each non-hull background primitive)
        noise: one line per spike

    Raises:
        DataValidationError: For scatter on a phantom not declared piecewise
            constant, or noise mode without spikes
    """
    start_time = time.time()
    if mode == 'beam-hardening':
        lines = enumerate_streak_candidates(phantom.metals, fov=phantom.fov) if phantom.metals else []
    elif mode == 'scatter':
        if not phantom.piecewise_constant:
            raise DataValidationError(
                message=f"Scatter prediction needs a piecewise-constant phantom ('{phantom.name}' is not)",
                data_type="phantom",
                constraint="piecewise_constant"
            )
        regions = list(phantom.metals) + [[p] for p in phantom.background if not p.hull]
        lines = enumerate_streak_candidates(regions, fov=phantom.fov, source='scatter') if regions else []
    elif mode == 'noise':
        if spikes is None:
            raise DataValidationError(message="Noise prediction needs the spike list", data_type="noise",
                                      constraint="spikes")
        lines = []
        for phi, s, _ in spikes.spikes:
            cphi, cs = canonical_line(phi, s)
            lines.append(StreakLine(phi=cphi, s=cs, span_dim=2, source='noise-spike'))
    else:
        raise DataValidationError(message=f"Unknown streak mode '{mode}'", data_type="mode", value=mode)

    logger.info(
        "Streak prediction complete",
        mode=mode,
        lines=len(lines),
        duration_ms=round((time.time() - start_time) * 1000, 2)
    )
    return lines


def build_exclusion_mask(
    phantom: Phantom,
    image_grid: ImageGrid,
    metal_dilation: int = 3,
    edge_band: int = 2
) -> np.ndarray:
    """Pixels the scorer ignores: dilated metal plus bands around f_E0 edges.

    Returns:
        np.ndarray: Boolean (n, n) mask, True where samples are excluded
    """
    metal = render_metal_mask(phantom, image_grid)
    if metal_dilation > 0 and metal.any():
        metal = binary_dilation(metal, iterations=metal_dilation)

    f = phantom.f_e0(image_grid.points())
    edges = np.zeros(image_grid.shape, dtype=bool)
    dv = np.abs(np.diff(f, axis=0)) > 1e-12
    dh = np.abs(np.diff(f, axis=1)) > 1e-12
    edges[:-1] |= dv
    edges[1:] |= dv
    edges[:, :-1] |= dh
    edges[:, 1:] |= dh
    if edge_band > 0 and edges.any():
        edges = binary_dilation(edges, iterations=edge_band)
    return metal | edges


def high_pass(image: RasterImage, sigma: float = 2.0) -> np.ndarray:
    """Image minus its Gaussian blur (sigma in pixels)."""
    return image.values - gaussian_filter(image.values, sigma=sigma)


def _line_samples(
    residual: np.ndarray,
    grid: ImageGrid,
    mask: np.ndarray | None,
    phi: float,
    s: float
) -> np.ndarray:
    """|high-pass| samples at pixel-pitch spacing along the line, unmasked only."""
    step = grid.pitch
    half = grid.fov * math.sqrt(2.0)
    t = np.arange(-half, half + step / 2.0, step)
    x = s * math.cos(phi) - t * math.sin(phi)
    y = s * math.sin(phi) + t * math.cos(phi)
    limit = grid.fov - grid.pitch / 2.0
    inside = (np.abs(x) <= limit) & (np.abs(y) <= limit)
    row, col = grid.to_index(x[inside], y[inside])
    if mask is not None:
        r = np.clip(np.rint(row).astype(int), 0, grid.n - 1)
        c = np.clip(np.rint(col).astype(int), 0, grid.n - 1)
        keep = ~mask[r, c]
        row, col = row[keep], col[keep]
    if row.size == 0:
        return row
    return np.abs(map_coordinates(residual, [row, col], order=1, mode='nearest'))


def _score_residual(
    residual: np.ndarray,
    grid: ImageGrid,
    mask: np.ndarray | None,
    phi: float,
    s: float
) -> float | None:
    samples = _line_samples(residual, grid, mask, phi, s)
    if samples.size < MIN_SCORE_SAMPLES:
        return None
    return float(samples.mean())


def streak_score(
    image: RasterImage,
    line: StreakLine,
    exclusion_mask: np.ndarray | None = None,
    sigma: float = 2.0
) -> float | None:
    """Mean |image - blur| along a line, skipping excluded pixels.

    Args:
        image: Reconstruction to measure
        line: Line to sample, at pixel-pitch steps inside the field of view
        exclusion_mask: Boolean mask of ignored pixels (None ignores nothing)
        sigma: Gaussian blur width in pixels

    Returns:
        float | None: The score, or None when fewer than 20 samples remain
    """
    return _score_residual(high_pass(image, sigma), image.grid, exclusion_mask, line.phi, line.s)


class LineScore(BaseModel):
    """A line with its score, ratio to the control median and verdict."""

    model_config = ConfigDict(frozen=True)

    line: StreakLine
    score: float | None
    ratio: float | None
    detected: bool


class StreakReport(BaseModel):
    """Scores of predicted lines against random control lines."""

    model_config = ConfigDict(frozen=True)

    measured: list[LineScore]
    controls: list[tuple[float, float, float]]
    control_median: float
    theta: float
    seed: int

    @property
    def predicted(self) -> list[StreakLine]:
        return [m.line for m in self.measured]

    @property
    def mean_ratio(self) -> float | None:
        ratios = [m.ratio for m in self.measured if m.ratio is not None]
        return float(np.mean(ratios)) if ratios else None

    def rows(self) -> list[dict[str, object]]:
        """Flat rows for CSV export: predicted lines first, then controls."""
        out = []
        for m in self.measured:
            out.append({
                'kind': 'predicted',
                'phi_rad': m.line.phi,
                's': m.line.s,
                'source': m.line.source,
                'span_dim': m.line.span_dim,
                'score': m.score,
                'ratio': m.ratio,
                'detected': m.detected
            })
        for phi, s, score in self.controls:
            out.append({
                'kind': 'control',
                'phi_rad': phi,
                's': s,
                'source': '',
                'span_dim': '',
                'score': score,
                'ratio': score / self.control_median if self.control_median > 0 else None,
                'detected': ''
            })
        return out

    def summary(self) -> str:
        """Human-readable report text."""
        detected = sum(1 for m in self.measured if m.detected)
        lines = [
            f"predicted lines: {len(self.measured)}",
            f"detected: {detected} (theta = {self.theta:g})",
            f"controls: {len(self.controls)} (seed {self.seed}), median score {self.control_median:.6g}",
        ]
        if self.mean_ratio is not None:
            lines.append(f"mean predicted ratio: {self.mean_ratio:.4f}")
        for m in self.measured:
            ratio = "n/a" if m.ratio is None else f"{m.ratio:.3f}"
            verdict = "detected" if m.detected else "not detected"
            lines.append(f"  phi={m.line.phi:+.9f} s={m.line.s:+.9f} [{m.line.source}] ratio={ratio} {verdict}")
        return "\n".join(lines) + "\n"


def _line_separation(a: tuple[float, float], b: tuple[float, float], radius: float) -> float:
    """Upper bound on the distance between two lines inside a disk of `radius`."""
    pa, sa = canonical_line(*a)
    pb, sb = canonical_line(*b)
    direct = abs(sa - sb) + radius * abs(pa - pb)
    flipped = abs(sa + sb) + radius * abs(abs(pa - pb) - math.pi)
    return min(direct, flipped)


def validate_prediction(
    image: RasterImage,
    predicted: list[StreakLine],
    exclusion_mask: np.ndarray | None = None,
    n_controls: int = 200,
    seed: int = 0,
    theta: float = 2.0,
    sigma: float = 2.0,
    control_margin: float = 3.0
) -> StreakReport:
    """Score predicted lines and random control lines.

    Controls are uniform in phi over (-pi/2, pi/2] and s over [-fov, fov];
    candidates within `control_margin` pixels of a predicted line, or with
    too few unmasked samples, are redrawn.

    Args:
        image: Reconstruction to measure
        predicted: Lines to test
        exclusion_mask: Pixels ignored by the scorer
        n_controls: Number of control lines (>= 50)
        seed: Control RNG seed
        theta: Detection threshold relative to the control median
        sigma: High-pass blur width in pixels
        control_margin: Exclusion distance around predicted lines, in pixels

    Returns:
        StreakReport: Per-line scores, ratios and verdicts

    Raises:
        DataValidationError: If n_controls < 50 or controls cannot be drawn

    Example:
        >>> report = validate_prediction(recon, lines, mask, n_controls=200, seed=0)
        >>> [m.detected for m in report.measured]
        [True, True, True, True]
    """
    if n_controls < MIN_CONTROLS:
        raise DataValidationError(
            message=f"n_controls must be >= {MIN_CONTROLS}, got {n_controls}",
            data_type="report",
            constraint="n_controls",
            value=n_controls
        )
    start_time = time.time()
    grid = image.grid
    residual = high_pass(image, sigma)
    rng = np.random.default_rng(seed)
    radius = grid.fov * math.sqrt(2.0)
    margin = control_margin * grid.pitch

    controls: list[tuple[float, float, float]] = []
    attempts = 0
    while len(controls) < n_controls:
        attempts += 1
        if attempts > 100 * n_controls:
            raise DataValidationError(
                message=f"Could only draw {len(controls)} of {n_controls} control lines",
                data_type="report",
                constraint="controls"
            )
        phi = float(math.pi / 2.0 - rng.uniform(0.0, math.pi))
        s = float(rng.uniform(-grid.fov, grid.fov))
        if any(_line_separation((phi, s), (p.phi, p.s), radius) <= margin for p in predicted):
            continue
        score = _score_residual(residual, grid, exclusion_mask, phi, s)
        if score is not None:
            controls.append((phi, s, score))

    median = float(np.median([c[2] for c in controls]))
    measured = []
    for line in predicted:
        score = _score_residual(residual, grid, exclusion_mask, line.phi, line.s)
        ratio = None if score is None or median <= 0 else score / median
        measured.append(LineScore(line=line, score=score, ratio=ratio, detected=ratio is not None and ratio >= theta))

    report = StreakReport(measured=measured, controls=controls, control_median=median, theta=theta, seed=seed)
    logger.info(
        "Streak validation complete",
        predicted=len(predicted),
        detected=sum(1 for m in measured if m.detected),
        control_median=round(median, 8),
        duration_ms=round((time.time() - start_time) * 1000, 2)
    )
    return report
