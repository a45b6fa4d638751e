import numpy as np
import pytest

from ctstreak.core.exceptions import DataValidationError, GridError
from ctstreak.core.grid_models import ImageGrid, RasterImage, Sinogram, SinogramGrid
from ctstreak.core.phantom_models import Disk, Phantom
from ctstreak.core.radon import (
    backproject,
    fbp,
    metal_projection,
    padded_length,
    primitive_projection,
    radon_analytic,
    radon_numeric,
    ramp_filter,
    render_metal_mask,
    render_phantom,
)


@pytest.fixture
def centered_disk():
    return Phantom(name="disk", background=[Disk(center=(0.0, 0.0), radius=0.5, value=1.0)])


def test_grid_conventions():
    grid = SinogramGrid(n_phi=4, n_s=5, s_max=1.0)
    assert grid.angles() == pytest.approx([-np.pi / 2, 0.0, np.pi / 2, np.pi])
    assert grid.offsets() == pytest.approx([-1.0, -0.5, 0.0, 0.5, 1.0])
    assert grid.nearest_node(0.01, 0.26) == (1, 3)
    with pytest.raises(GridError):
        grid.nearest_node(0.0, 1.5)
    with pytest.raises(GridError, match="does not contain the field of view"):
        grid.check_contains(1.0)

    image = ImageGrid(n=4, fov=1.0)
    assert image.x_coords() == pytest.approx([-0.75, -0.25, 0.25, 0.75])
    assert image.y_coords() == pytest.approx([0.75, 0.25, -0.25, -0.75])
    row, col = image.to_index(np.array(0.25), np.array(0.75))
    assert (float(row), float(col)) == pytest.approx((0.0, 2.0))


def test_containers_check_shape_and_finiteness(sino_grid):
    with pytest.raises(GridError):
        Sinogram(grid=sino_grid, values=np.zeros((3, 3)))
    values = np.zeros(sino_grid.shape)
    values[0, 0] = np.nan
    with pytest.raises(DataValidationError):
        Sinogram(grid=sino_grid, values=values)


def test_analytic_projection_of_a_disk(centered_disk, sino_grid):
    sino = radon_analytic(centered_disk, sino_grid)
    s = sino_grid.offsets()
    expected = 2.0 * np.sqrt(np.clip(0.25 - s ** 2, 0.0, None))
    assert np.allclose(sino.values, expected[None, :], atol=1e-12)
    assert sino.metadata['kind'] == 'f_e0'


def test_metal_projection_is_the_indicator(two_disk_phantom, sino_grid):
    metal = metal_projection(two_disk_phantom, sino_grid)
    region = radon_analytic(two_disk_phantom.metals[0], sino_grid)
    assert np.array_equal(metal.values, region.values)
    assert metal.values.max() == pytest.approx(0.4, abs=1e-3)
    assert metal.values.min() == 0.0


def test_support_must_fit_the_detector():
    grid = SinogramGrid(n_phi=8, n_s=65, s_max=1.5)
    with pytest.raises(GridError) as excinfo:
        primitive_projection(Disk(center=(1.0, 0.0), radius=0.6), grid)
    assert excinfo.value.constraint == "support"


def test_padded_length():
    assert padded_length(256) == 2048
    assert padded_length(257) == 4096
    assert padded_length(512) == 4096
    assert padded_length(257, factor=2) == 1024


def test_ramp_filter_removes_constants_without_padding(sino_grid):
    flat = Sinogram(grid=sino_grid, values=np.ones(sino_grid.shape))
    filtered = ramp_filter(flat, pad=False)
    assert np.allclose(filtered.values, 0.0, atol=1e-10)
    assert filtered.metadata['padded_length'] == sino_grid.n_s
    assert ramp_filter(flat).metadata['padded_length'] == 4096


def test_fbp_reconstructs_a_disk(centered_disk):
    grid = SinogramGrid(n_phi=360, n_s=512, s_max=1.5)
    image_grid = ImageGrid(n=128, fov=1.0)
    recon = fbp(radon_analytic(centered_disk, grid), image_grid)

    points = image_grid.points()
    radius = np.hypot(points[..., 0], points[..., 1])
    assert recon.values[radius < 0.35].mean() == pytest.approx(1.0, abs=0.05)
    assert abs(recon.values[(radius > 0.65) & (radius < 0.9)].mean()) < 0.02


def test_thread_count_does_not_change_results(two_disk_phantom, sino_grid, image_grid):
    sino = ramp_filter(radon_analytic(two_disk_phantom, sino_grid))
    single = backproject(sino, image_grid, threads=1)
    multi = backproject(sino, image_grid, threads=3)
    assert np.array_equal(single.values, multi.values)

    image = render_phantom(two_disk_phantom, image_grid)
    assert np.array_equal(
        radon_numeric(image, sino_grid, threads=1).values,
        radon_numeric(image, sino_grid, threads=4).values
    )


def test_numeric_projection_matches_analytic(centered_disk):
    image = render_phantom(centered_disk, ImageGrid(n=128, fov=1.0), supersample=4)
    grid = SinogramGrid(n_phi=36, n_s=101, s_max=1.5)
    numeric = radon_numeric(image, grid)
    exact = radon_analytic(centered_disk, grid)
    assert np.abs(numeric.values - exact.values).mean() < 0.01


def test_render_phantom(two_disk_phantom, image_grid):
    image = render_phantom(two_disk_phantom, image_grid)
    assert isinstance(image, RasterImage)
    # Pixel (31, 41) has its center inside the right metal disk
    assert image.values[31, 41] == pytest.approx(2.02)
    assert image.values[0, 0] == 0.0
    assert image.values[32, 32] == pytest.approx(0.02)

    hot = render_phantom(two_disk_phantom, image_grid, energy=0.07, e0=0.06)
    assert hot.values[31, 41] == pytest.approx(1.02)
    with pytest.raises(GridError):
        render_phantom(two_disk_phantom, image_grid, energy=0.07)

    mask = render_metal_mask(two_disk_phantom, image_grid)
    assert mask[31, 41]
    assert not mask[32, 32]


def test_ramp_filter_impulse_response_is_the_ramp_kernel():
    grid = SinogramGrid(n_phi=2, n_s=257, s_max=1.5)
    h = grid.h_s
    values = np.zeros(grid.shape)
    values[:, 128] = 1.0
    row = ramp_filter(Sinogram(grid=grid, values=values)).values[0]

    n = np.arange(-40, 41)
    odd = n % 2 != 0
    kernel = np.zeros(n.shape)
    kernel[odd] = -2.0 / (np.pi * n[odd].astype(float) ** 2 * h)
    kernel[n == 0] = np.pi / (2.0 * h)
    assert np.allclose(row[128 + n], kernel, rtol=1e-5, atol=1e-6 * np.pi / (2.0 * h))
    assert np.allclose(row[128 + n], row[128 - n], atol=1e-9)


@pytest.mark.parametrize("omega", [30.0, 75.0])
def test_ramp_filter_scales_a_sinusoid_by_its_frequency(omega):
    grid = SinogramGrid(n_phi=2, n_s=257, s_max=1.5)
    s = grid.offsets()
    wave = np.cos(omega * s + 0.4)
    row = ramp_filter(Sinogram(grid=grid, values=np.tile(wave, (2, 1)))).values[0]
    middle = np.abs(s) < 0.75
    assert np.max(np.abs(row[middle] - omega * wave[middle])) < 0.01 * omega


def test_backprojection_is_the_adjoint():
    image_grid = ImageGrid(n=128, fov=1.0)
    grid = SinogramGrid(n_phi=90, n_s=129, s_max=1.5)
    points = image_grid.points()
    f = np.exp(-((points[..., 0] - 0.1) ** 2 + (points[..., 1] + 0.05) ** 2) / (2 * 0.15 ** 2))
    image = RasterImage(grid=image_grid, values=f)
    phi = grid.angles()[:, None]
    s = grid.offsets()[None, :]
    g = np.exp(-s ** 2 / 0.2) * (1.0 + 0.5 * np.cos(phi))

    forward = np.sum(radon_numeric(image, grid).values * g) * grid.h_phi * grid.h_s
    adjoint = np.sum(f * backproject(Sinogram(grid=grid, values=g), image_grid).values) * image_grid.pitch ** 2
    assert forward == pytest.approx(adjoint, rel=0.01)


def test_fbp_is_linear(two_disk_phantom, single_disk_phantom, sino_grid, image_grid):
    a = radon_analytic(two_disk_phantom, sino_grid)
    b = radon_analytic(single_disk_phantom, sino_grid)
    combined = fbp(a.with_values(2.0 * a.values - 0.5 * b.values), image_grid).values
    separate = 2.0 * fbp(a, image_grid).values - 0.5 * fbp(b, image_grid).values
    assert np.allclose(combined, separate, rtol=0.0, atol=1e-10 * np.abs(separate).max())
    assert np.array_equal(fbp(Sinogram.zeros(sino_grid), image_grid).values, np.zeros(image_grid.shape))


def test_analytic_sinogram_is_even(two_disk_phantom, quarter_disk_phantom):
    grid = SinogramGrid(n_phi=36, n_s=101, s_max=1.5)
    half = grid.n_phi // 2
    for phantom in (two_disk_phantom, quarter_disk_phantom):
        values = radon_analytic(phantom, grid).values
        assert np.allclose(np.roll(values, -half, axis=0)[:, ::-1], values, atol=1e-12)
