import numpy as np
import pytest

from ctstreak.core.artifact import (
    MIN_CONTROLS,
    build_exclusion_mask,
    decompose,
    fma_series,
    metal_artifact_image,
    predict_streaks,
    streak_score,
    validate_prediction,
)
from ctstreak.core.exceptions import DataValidationError
from ctstreak.core.geometry import StreakLine
from ctstreak.core.grid_models import ImageGrid, RasterImage, SinogramGrid
from ctstreak.core.phantom_models import Disk, Phantom
from ctstreak.core.radon import metal_projection, radon_analytic
from ctstreak.core.spectral import NoiseSpikes, Spectrum, polychromatic_project


@pytest.fixture
def coarse_grid():
    return SinogramGrid(n_phi=90, n_s=129, s_max=1.5)


@pytest.fixture
def line_image():
    """Blank image with a one-pixel bright column at x = 0.296875."""
    grid = ImageGrid(n=64, fov=1.0)
    values = np.zeros(grid.shape)
    values[:, 41] = 1.0
    return RasterImage(grid=grid, values=values)


def test_beam_hardening_prediction(two_disk_phantom, single_disk_phantom):
    lines = predict_streaks(two_disk_phantom, 'beam-hardening')
    assert len(lines) == 4
    assert predict_streaks(single_disk_phantom, 'beam-hardening') == []
    water = Phantom(background=[Disk(center=(0.0, 0.0), radius=0.5, value=0.02, hull=True)])
    assert predict_streaks(water, 'beam-hardening') == []


def test_scatter_prediction_covers_every_subdomain(bone_phantom):
    lines = predict_streaks(bone_phantom, 'scatter')
    # Three disks pairwise: four common tangents per pair
    assert len(lines) == 12
    assert {line.source for line in lines} == {'scatter'}
    assert predict_streaks(bone_phantom, 'beam-hardening') == []

    smooth = bone_phantom.model_copy(update={'piecewise_constant': False})
    with pytest.raises(DataValidationError):
        predict_streaks(smooth, 'scatter')


def test_noise_prediction_has_one_line_per_spike(two_disk_phantom, coarse_grid):
    spikes = NoiseSpikes.generate(coarse_grid, count=3, seed=7, s_limit=0.8)
    lines = predict_streaks(two_disk_phantom, 'noise', spikes=spikes)
    assert len(lines) == 3
    assert all(line.source == 'noise-spike' and line.span_dim == 2 for line in lines)
    assert all(-np.pi / 2 < line.phi <= np.pi / 2 for line in lines)
    with pytest.raises(DataValidationError):
        predict_streaks(two_disk_phantom, 'noise')


def test_exclusion_mask(two_disk_phantom, image_grid):
    mask = build_exclusion_mask(two_disk_phantom, image_grid)
    assert mask.shape == image_grid.shape
    assert mask[31, 41]
    assert not mask[0, 0]
    assert not mask[32, 32]
    bare = build_exclusion_mask(two_disk_phantom, image_grid, metal_dilation=0, edge_band=0)
    assert bare.sum() < mask.sum()


def test_streak_score(line_image):
    on_line = StreakLine(phi=0.0, s=0.296875, span_dim=2)
    off_line = StreakLine(phi=0.0, s=-0.5, span_dim=2)
    assert streak_score(line_image, on_line) > 0.5
    assert streak_score(line_image, off_line) == pytest.approx(0.0, abs=1e-6)
    everything = np.ones(line_image.grid.shape, dtype=bool)
    assert streak_score(line_image, on_line, exclusion_mask=everything) is None


def test_validation_detects_a_bright_line(line_image):
    lines = [StreakLine(phi=0.0, s=0.296875, span_dim=2), StreakLine(phi=0.0, s=-0.5, span_dim=2)]
    report = validate_prediction(line_image, lines, n_controls=MIN_CONTROLS, seed=0)
    assert len(report.controls) == MIN_CONTROLS
    assert report.control_median > 0
    assert report.measured[0].detected
    assert report.measured[0].ratio > 5.0
    assert not report.measured[1].detected
    assert report.predicted == lines

    rows = report.rows()
    assert len(rows) == 2 + MIN_CONTROLS
    assert rows[0]['kind'] == 'predicted'
    assert rows[-1]['kind'] == 'control'
    summary = report.summary()
    assert summary.startswith("predicted lines: 2\n")
    assert "detected: 1 (theta = 2)" in summary


def test_controls_depend_only_on_the_seed(line_image):
    lines = [StreakLine(phi=0.0, s=0.296875, span_dim=2)]
    first = validate_prediction(line_image, lines, n_controls=60, seed=5)
    again = validate_prediction(line_image, lines, n_controls=60, seed=5)
    other = validate_prediction(line_image, lines, n_controls=60, seed=6)
    assert first.controls == again.controls
    assert first.controls != other.controls


def test_too_few_controls_are_rejected(line_image):
    with pytest.raises(DataValidationError) as excinfo:
        validate_prediction(line_image, [], n_controls=MIN_CONTROLS - 1)
    assert excinfo.value.constraint == "n_controls"


def test_no_ratios_without_predictions(line_image):
    report = validate_prediction(line_image, [], n_controls=MIN_CONTROLS)
    assert report.mean_ratio is None
    assert report.measured == []


def test_decomposition_is_linear(two_disk_phantom, coarse_grid, image_grid):
    data = polychromatic_project(two_disk_phantom, Spectrum.uniform(0.06, 0.02), coarse_grid)
    ideal = radon_analytic(two_disk_phantom, coarse_grid)
    parts = decompose(data, ideal, image_grid)
    assert parts.max_linearity_residual < 1e-9

    # Data minus ideal is exactly -g(alpha*delta R chi_D)
    f_ma = metal_artifact_image(metal_projection(two_disk_phantom, coarse_grid), -2.0, image_grid)
    assert np.allclose(f_ma.values, parts.f_ma.values, atol=1e-10)


def test_empty_metal_has_no_artifact(single_disk_phantom, coarse_grid, image_grid):
    empty = radon_analytic(single_disk_phantom, coarse_grid).with_values(np.zeros(coarse_grid.shape))
    image = metal_artifact_image(empty, -2.0, image_grid)
    assert not image.values.any()


def test_series_converges_to_the_closed_form(two_disk_phantom, coarse_grid, image_grid):
    metal = metal_projection(two_disk_phantom, coarse_grid)
    exact = metal_artifact_image(metal, -2.0, image_grid)
    series = fma_series(metal, -2.0, k_outer=8, n_inner=6, image_grid=image_grid)
    scale = np.abs(exact.values).max()
    assert np.abs(series.values - exact.values).max() < 1e-6 * scale
    coarse = fma_series(metal, -2.0, k_outer=1, n_inner=1, image_grid=image_grid)
    assert np.abs(coarse.values - exact.values).max() > np.abs(series.values - exact.values).max()

    image_order = fma_series(metal, -2.0, k_outer=2, n_inner=2, image_grid=image_grid, ordering='image')
    assert image_order.metadata['ordering'] == 'image'
    assert np.all(np.isfinite(image_order.values))


def test_series_guards(two_disk_phantom, coarse_grid, image_grid):
    metal = metal_projection(two_disk_phantom, coarse_grid)
    with pytest.raises(DataValidationError) as excinfo:
        fma_series(metal, -5.0, k_outer=3, n_inner=3, image_grid=image_grid)
    assert excinfo.value.constraint == "convergence"
    with pytest.raises(DataValidationError):
        fma_series(metal, -2.0, k_outer=0, n_inner=3, image_grid=image_grid)
