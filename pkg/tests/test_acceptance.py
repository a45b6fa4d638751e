"""End-to-end checks on the shipped example configurations at full resolution."""

import csv
import math
from pathlib import Path

import numpy as np
import pytest

from ctstreak.core.artifact import build_exclusion_mask, predict_streaks, validate_prediction
from ctstreak.core.config_loader import parse_config
from ctstreak.core.data_io import read_raw, read_spike_csv
from ctstreak.core.grid_models import ImageGrid, SinogramGrid
from ctstreak.core.phantom_library import shepp_logan_original
from ctstreak.core.phantom_loader import load_phantom
from ctstreak.core.phantom_models import Disk, Phantom
from ctstreak.core.pipeline import run_pipeline
from ctstreak.core.radon import fbp, radon_analytic, render_phantom
from ctstreak.core.spectral import NoiseSpikes, noisy_project

from .conftest import CONFIG_DIR

pytestmark = pytest.mark.slow

FULL_SINOGRAM = SinogramGrid(n_phi=360, n_s=512, s_max=1.5)
FULL_IMAGE = ImageGrid(n=256, fov=1.0)
METAL_DISK = ((-0.3, 0.0), 0.1)
BONE_DISKS = (((0.3, 0.25), 0.1), ((0.3, -0.25), 0.1))


def _predicted_rows(out_dir: str, name: str = "report.csv") -> list[dict[str, object]]:
    with open(Path(out_dir) / name, newline='', encoding='utf-8') as handle:
        rows = [row for row in csv.DictReader(handle) if row['kind'] == 'predicted']
    return [
        {'phi': float(r['phi_rad']), 's': float(r['s']), 'ratio': float(r['ratio']), 'detected': r['detected'] == 'true'}
        for r in rows
    ]


def _touches(line, disk) -> bool:
    (cx, cy), radius = disk
    distance = cx * math.cos(line.phi) + cy * math.sin(line.phi) - line.s
    return abs(abs(distance) - radius) < 1e-6


def test_shepp_logan_round_trip_error():
    phantom = shepp_logan_original()
    recon = fbp(radon_analytic(phantom, FULL_SINOGRAM), FULL_IMAGE).values
    truth = render_phantom(phantom, FULL_IMAGE).values
    keep = ~build_exclusion_mask(phantom, FULL_IMAGE, metal_dilation=0, edge_band=2)
    error = np.linalg.norm((recon - truth)[keep]) / np.linalg.norm(truth[keep])
    assert error <= 0.10


def test_disk_interior_mean():
    phantom = Phantom(name="disk", background=[Disk(center=(0.0, 0.0), radius=0.5, value=1.0)])
    recon = fbp(radon_analytic(phantom, FULL_SINOGRAM), FULL_IMAGE)
    points = FULL_IMAGE.points()
    inside = np.hypot(points[..., 0], points[..., 1]) < 0.45
    assert recon.values[inside].mean() == pytest.approx(1.0, abs=0.03)


def test_two_disks_streaks_are_detected(tmp_path):
    result = run_pipeline(parse_config(CONFIG_DIR / "two_disks.yaml"), out_dir=tmp_path)
    assert result.predicted_lines == 4
    assert result.detected_lines == 4
    rows = _predicted_rows(result.out_dir)
    assert len(rows) == 4
    assert all(row['ratio'] >= 2.0 and row['detected'] for row in rows)

    # Linear completion of the metal trace
    assert result.mean_ratio_mar <= 0.5 * result.mean_ratio
    assert abs(result.mean_ratio_mar - 1.0) < abs(result.mean_ratio - 1.0)


def test_poisson_completion_removes_the_streaks(tmp_path):
    result = run_pipeline(parse_config(CONFIG_DIR / "poisson_mar.yaml"), out_dir=tmp_path)
    assert result.predicted_lines == 4
    assert result.mean_ratio_mar <= 0.5 * result.mean_ratio
    assert abs(result.mean_ratio_mar - 1.0) < abs(result.mean_ratio - 1.0)


def test_quarter_disk_edges_are_detected(tmp_path):
    result = run_pipeline(parse_config(CONFIG_DIR / "quarter_disk.yaml"), out_dir=tmp_path)
    rows = _predicted_rows(result.out_dir)
    assert len(rows) == 2
    assert sorted(round(row['phi'], 9) for row in rows) == [0.0, round(math.pi / 2, 9)]
    assert all(abs(row['s']) < 1e-9 for row in rows)
    assert all(row['ratio'] >= 2.0 for row in rows)


def test_single_disk_has_no_streaks(tmp_path):
    result = run_pipeline(parse_config(CONFIG_DIR / "single_disk.yaml"), out_dir=tmp_path)
    assert result.predicted_lines == 0
    assert result.mean_ratio is None


def test_scatter_streaks_join_metal_and_bone(tmp_path):
    config = parse_config(CONFIG_DIR / "scatter.yaml")
    result = run_pipeline(config, out_dir=tmp_path / "scatter")
    phantom = load_phantom(CONFIG_DIR / "phantoms" / "metal_and_bone.yaml")
    lines = predict_streaks(phantom, 'scatter')
    metal_bone = [line for line in lines
                  if _touches(line, METAL_DISK) and any(_touches(line, bone) for bone in BONE_DISKS)]
    bone_bone = [line for line in lines if all(_touches(line, bone) for bone in BONE_DISKS)]
    assert len(metal_bone) >= 4
    assert len(bone_bone) == 4

    exclusion = build_exclusion_mask(phantom, FULL_IMAGE)
    scattered = read_raw(Path(result.out_dir) / "recon.raw")
    report = validate_prediction(scattered, metal_bone, exclusion, seed=0)
    assert sum(m.detected for m in report.measured) >= 4

    # Same geometry, beam hardening only: nothing couples the two bones
    hardened_config = config.model_copy(update={
        'physics': parse_config(CONFIG_DIR / "two_disks.yaml").physics
    })
    hardened = run_pipeline(hardened_config, out_dir=tmp_path / "hardened")
    recon = read_raw(Path(hardened.out_dir) / "recon.raw")
    report = validate_prediction(recon, bone_bone, exclusion, seed=0)
    assert not any(m.detected for m in report.measured)


def test_noise_spikes_are_detected_one_by_one(tmp_path):
    config = parse_config(CONFIG_DIR / "noise.yaml")
    result = run_pipeline(config, out_dir=tmp_path)
    assert result.predicted_lines == 3
    assert result.detected_lines == 3

    spikes = read_spike_csv(Path(result.out_dir) / "spikes.csv")
    phantom = load_phantom(CONFIG_DIR / "phantoms" / "two_disks.yaml")
    lines = predict_streaks(phantom, 'noise', spikes=spikes)
    kept = NoiseSpikes(spikes=spikes.spikes[1:])
    recon = fbp(noisy_project(phantom, kept, FULL_SINOGRAM), FULL_IMAGE)
    report = validate_prediction(recon, lines, build_exclusion_mask(phantom, FULL_IMAGE), seed=0)
    assert [m.detected for m in report.measured] == [False, True, True]


def test_monochromatic_data_are_artifact_free(tmp_path):
    result = run_pipeline(parse_config(CONFIG_DIR / "monochromatic.yaml"), out_dir=tmp_path)
    assert result.predicted_lines == 0
    assert result.max_linearity_residual < 1e-9
