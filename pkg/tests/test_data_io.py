import numpy as np
import pytest

from ctstreak.core.artifact import validate_prediction
from ctstreak.core.data_io import (
    PGM_MAXVAL,
    REPORT_COLUMNS,
    read_pgm,
    read_raw,
    read_sinogram_csv,
    read_spike_csv,
    read_streak_csv,
    read_window,
    write_overlay,
    write_pgm,
    write_raw,
    write_report,
    write_sinogram_csv,
    write_spike_csv,
    write_streak_csv,
)
from ctstreak.core.exceptions import DataValidationError, FileSystemError
from ctstreak.core.geometry import StreakLine, enumerate_streak_candidates
from ctstreak.core.grid_models import ImageGrid, RasterImage, Sinogram, SinogramGrid
from ctstreak.core.radon import radon_analytic, render_phantom
from ctstreak.core.spectral import NoiseSpikes


@pytest.fixture
def small_sino(two_disk_phantom):
    return radon_analytic(two_disk_phantom, SinogramGrid(n_phi=12, n_s=33, s_max=1.5))


def test_raw_files_keep_values_and_grids(tmp_path, small_sino, two_disk_phantom):
    write_raw(small_sino, tmp_path / "sino.raw")
    loaded = read_raw(tmp_path / "sino.raw")
    assert isinstance(loaded, Sinogram)
    assert loaded.grid == small_sino.grid
    assert np.array_equal(loaded.values, small_sino.values)

    image = render_phantom(two_disk_phantom, ImageGrid(n=16, fov=1.0))
    write_raw(image, tmp_path / "image.raw")
    loaded = read_raw(tmp_path / "image.raw")
    assert isinstance(loaded, RasterImage)
    assert loaded.grid == image.grid
    assert np.array_equal(loaded.values, image.values)


def test_raw_errors(tmp_path, small_sino):
    with pytest.raises(FileSystemError):
        read_raw(tmp_path / "missing.raw")
    (tmp_path / "short.raw").write_bytes(b"CTSTRK01")
    with pytest.raises(DataValidationError):
        read_raw(tmp_path / "short.raw")
    path = write_raw(small_sino, tmp_path / "cut.raw")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DataValidationError) as excinfo:
        read_raw(path)
    assert excinfo.value.constraint == "length"
    path.write_bytes(b"NOTMAGIC" + path.read_bytes()[8:])
    with pytest.raises(DataValidationError):
        read_raw(path)


def test_sinogram_csv(tmp_path, small_sino):
    path = write_sinogram_csv(small_sino, tmp_path / "sino.csv")
    assert path.read_text().startswith("# ctstreak-sinogram n_phi=12 n_s=33 s_max=1.5\n")
    loaded = read_sinogram_csv(path)
    assert loaded.grid == small_sino.grid
    assert np.array_equal(loaded.values, small_sino.values)

    (tmp_path / "plain.csv").write_text("1,2,3\n")
    with pytest.raises(DataValidationError):
        read_sinogram_csv(tmp_path / "plain.csv")


def test_pgm_is_windowed(tmp_path):
    values = np.array([[-1.0, 0.0], [0.5, 2.0]])
    image = RasterImage(grid=ImageGrid(n=2, fov=1.0), values=values)
    pgm, sidecar = write_pgm(image, tmp_path / "img.pgm", window=(0.0, 1.0))
    assert pgm.read_bytes().startswith(b"P5\n2 2\n65535\n")
    pixels = read_pgm(pgm)
    assert pixels.tolist() == [[0, 0], [round(0.5 * PGM_MAXVAL), PGM_MAXVAL]]
    assert sidecar.name == "img.pgm.window"
    assert read_window(sidecar) == (0.0, 1.0)
    with pytest.raises(DataValidationError):
        write_pgm(image, tmp_path / "bad.pgm", window=(1.0, 0.0))


def test_overlays(tmp_path, two_disk_phantom):
    image = render_phantom(two_disk_phantom, ImageGrid(n=32, fov=1.0))
    lines = enumerate_streak_candidates(two_disk_phantom.metals)
    png = write_overlay(image, lines, tmp_path / "overlay.png", window=(0.0, 0.05))
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    pgm = write_overlay(image, [StreakLine(phi=0.0, s=0.0, span_dim=2)], tmp_path / "overlay.pgm", window=(0.0, 0.05))
    pixels = read_pgm(pgm)
    # x = 0 lies on the boundary between columns 15 and 16
    assert (pixels[:, 15:17] == PGM_MAXVAL).any(axis=1).all()


def test_streak_and_spike_csv(tmp_path, two_disk_phantom):
    lines = enumerate_streak_candidates(two_disk_phantom.metals)
    path = write_streak_csv(lines, tmp_path / "streaks.csv")
    assert path.read_text().splitlines()[0] == "phi_rad,s,span_dim,source,tangency_count"
    loaded = read_streak_csv(path)
    assert [(line.phi, line.s, line.span_dim, line.source) for line in loaded] == \
        [(line.phi, line.s, line.span_dim, line.source) for line in lines]

    spikes = NoiseSpikes(spikes=[(0.1, -0.2, 3e-4), (1.0, 0.5, 1e-4)])
    assert read_spike_csv(write_spike_csv(spikes, tmp_path / "spikes.csv")).spikes == spikes.spikes

    (tmp_path / "wrong.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DataValidationError):
        read_streak_csv(tmp_path / "wrong.csv")


def test_report_files(tmp_path):
    image = RasterImage(grid=ImageGrid(n=32, fov=1.0), values=np.random.default_rng(0).normal(size=(32, 32)))
    report = validate_prediction(image, [StreakLine(phi=0.3, s=0.1, span_dim=2)], n_controls=50)
    csv_path, text_path = write_report(report, tmp_path / "report.csv", tmp_path / "report.txt")
    rows = csv_path.read_text().splitlines()
    assert rows[0] == ",".join(REPORT_COLUMNS)
    assert len(rows) == 1 + 1 + 50
    assert rows[1].startswith("predicted,")
    assert text_path.read_text() == report.summary()
