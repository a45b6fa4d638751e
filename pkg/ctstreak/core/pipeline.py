"""Pipeline Module

Runs the whole configuration-driven chain: phantom, projection under the
configured physics, reconstruction, artifact decomposition, streak
prediction and scoring, metal artifact reduction and the run manifest.

Every output is first written as '<name>.partial' and renamed only after
the last stage succeeds, so an aborted run leaves its partial outputs
marked. The manifest lists every output with its SHA-256 and carries no
timestamps: a fixed config and seed reproduce it byte for byte.

Public Classes:
    StageOutputs: Tracks files written by a run
    RunResult: Summary of a completed run

Public Functions:
    project: Projection data for a physics configuration
    run_pipeline: Execute the full pipeline
    verify_manifest: Recompute and compare manifest checksums
"""

import hashlib
import time
from contextlib import contextmanager
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Iterator

import yaml
from pydantic import BaseModel, ConfigDict

from .artifact import (
    build_exclusion_mask,
    decompose,
    metal_artifact_image,
    predict_streaks,
    validate_prediction,
)
from .config_loader import dump_config, resolve_threads
from .config_models import PipelineConfig
from .data_io import (
    file_sha256,
    write_overlay,
    write_pgm,
    write_raw,
    write_report,
    write_sinogram_csv,
    write_spike_csv,
    write_streak_csv,
    write_text,
)
from .exceptions import CTStreakError, DataValidationError, FileSystemError, PipelineError
from .file_reader import read_yaml_file
from .file_validator import ensure_output_directory
from .grid_models import RasterImage, Sinogram, SinogramGrid
from .logger import get_logger
from .mar import mar_linear, mar_poisson, metal_trace
from .phantom_loader import dump_phantom, resolve_phantom
from .phantom_models import Phantom, check_metal_contrast
from .radon import fbp, metal_projection, radon_analytic, render_phantom
from .spectral import (
    NoiseSpikes,
    ScatterModel,
    Spectrum,
    monochromatic_project,
    noisy_project,
    polychromatic_project,
    polychromatic_project_general,
    scatter_project,
)

logger = get_logger(__name__)


MANIFEST_NAME = "manifest.yaml"
PARTIAL_SUFFIX = ".partial"


def tool_version() -> str:
    try:
        return version("ctstreak")
    except PackageNotFoundError:
        return "0+unknown"


class StageOutputs:
    """Files written by a run, staged under a '.partial' suffix until commit."""

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = out_dir
        self._names: list[str] = []

    def path(self, name: str) -> Path:
        """Staging path for output `name`; the name is recorded once."""
        if name not in self._names:
            self._names.append(name)
        return self.out_dir / (name + PARTIAL_SUFFIX)

    @property
    def names(self) -> list[str]:
        return list(self._names)

    def commit(self) -> list[Path]:
        """Rename every staged file to its final name."""
        final = []
        for name in self._names:
            staged = self.out_dir / (name + PARTIAL_SUFFIX)
            target = self.out_dir / name
            try:
                staged.replace(target)
            except OSError as e:
                raise FileSystemError(
                    message=f"Failed to finalise {target}: {e}",
                    path=str(target),
                    operation="rename",
                    error_code=getattr(e, 'errno', None)
                )
            final.append(target)
        return final


class RunResult(BaseModel):
    """Outcome of `run_pipeline`."""

    model_config = ConfigDict(frozen=True)

    out_dir: str
    run_id: str
    mode: str
    files: list[str]
    predicted_lines: int
    detected_lines: int
    mean_ratio: float | None = None
    mean_ratio_mar: float | None = None
    max_linearity_residual: float | None = None
    manifest: str


@contextmanager
def _stage(name: str, run_id: str) -> Iterator[None]:
    start_time = time.time()
    try:
        yield
    except PipelineError:
        raise
    except CTStreakError as e:
        logger.error("Pipeline stage failed", stage=name, error=e.message, run_id=run_id)
        raise PipelineError(message=f"Stage '{name}' failed: {e.message}", stage=name, cause=type(e).__name__)
    except Exception as e:
        logger.error("Pipeline stage failed", stage=name, error=str(e), error_type=type(e).__name__, run_id=run_id)
        raise PipelineError(message=f"Stage '{name}' failed: {e}", stage=name, cause=type(e).__name__)
    logger.info("Stage complete", stage=name, run_id=run_id,
                duration_ms=round((time.time() - start_time) * 1000, 2))


def _spikes_for(config: PipelineConfig, grid: SinogramGrid) -> NoiseSpikes:
    noise = config.physics.noise
    if noise.spikes is not None:
        return NoiseSpikes(spikes=noise.spikes, seed=None)
    return NoiseSpikes.generate(
        grid,
        count=noise.count,
        lam=noise.lam,
        gain=noise.gain,
        seed=config.noise_seed(),
        s_limit=noise.s_limit
    )


def project(
    phantom: Phantom,
    config: PipelineConfig,
    spikes: NoiseSpikes | None = None
) -> tuple[Sinogram, NoiseSpikes | None]:
    """Projection data P for the configured physics mode.

    Returns:
        tuple: (P, the spikes used in noise mode or None)
    """
    grid = config.grid.sinogram_grid()
    physics = config.physics
    mode = physics.mode

    if mode == 'monochromatic':
        return monochromatic_project(phantom, grid), None
    if mode == 'beam-hardening':
        spectrum_cfg = physics.spectrum
        if spectrum_cfg.model == 'uniform':
            return polychromatic_project(phantom, Spectrum.uniform(spectrum_cfg.e0, spectrum_cfg.delta), grid,
                                         alpha_delta=spectrum_cfg.alpha_delta), None
        spectrum = Spectrum.binned_uniform(
            spectrum_cfg.e0, spectrum_cfg.delta, n_bins=spectrum_cfg.n_bins, rule=spectrum_cfg.rule
        )
        return polychromatic_project_general(phantom, spectrum, grid), None
    if mode == 'scatter':
        return scatter_project(phantom, ScatterModel(c=physics.scatter.c), grid), None
    spikes = spikes if spikes is not None else _spikes_for(config, grid)
    return noisy_project(phantom, spikes, grid), spikes


def _streak_mode(mode: str) -> str | None:
    return None if mode == 'monochromatic' else mode


def _alpha_delta(phantom: Phantom, config: PipelineConfig) -> float:
    spectrum_cfg = config.physics.spectrum
    return spectrum_cfg.alpha_delta if spectrum_cfg.alpha_delta is not None else phantom.alpha_delta(spectrum_cfg.delta)


def _write_image(outputs: StageOutputs, stem: str, image: RasterImage, window: tuple[float, float]) -> None:
    write_raw(image, outputs.path(f"{stem}.raw"))
    write_pgm(image, outputs.path(f"{stem}.pgm"), window=window, window_path=outputs.path(f"{stem}.pgm.window"))


def _write_sinogram(outputs: StageOutputs, stem: str, sino: Sinogram, csv: bool = True) -> None:
    write_raw(sino, outputs.path(f"{stem}.raw"))
    if csv:
        write_sinogram_csv(sino, outputs.path(f"{stem}.csv"))


def run_id_for(config: PipelineConfig) -> str:
    """Deterministic run id from the effective configuration."""
    return hashlib.sha256(dump_config(config).encode('utf-8')).hexdigest()[:10]


def run_pipeline(
    config: PipelineConfig,
    out_dir: str | Path | None = None,
    seed: int | None = None,
    threads: int | None = None
) -> RunResult:
    """Run phantom -> projection -> reconstruction -> prediction -> scoring -> MAR -> report.

    Outputs (under the output directory):
        phantom.yaml, phantom.raw, phantom.pgm: the phantom and its raster
        sinogram.raw/.csv: projection data P; ideal.raw: R f_E0
        metal_sinogram.raw: R chi_D (when the phantom has metal)
        spikes.csv: noise spikes (noise mode)
        recon.raw/.pgm: f_CT; f_ma.raw/.pgm: the metal artifact image
        streaks.csv, overlay.png: predicted lines
        report.csv/.txt: streak scores before MAR
        mar_sinogram.raw/.csv, mar_recon.raw/.pgm, mar_report.csv/.txt:
            the MAR pass (unless mar.method is 'none' or there is no metal)
        manifest.yaml: parameters, tool version and checksums

    Args:
        config: Validated configuration
        out_dir: Overrides config.output_dir
        seed: Overrides config.seed (noise and control seeds)
        threads: Overrides config.threads and CTSTREAK_THREADS

    Returns:
        RunResult: Counts, ratios and the written files

    Raises:
        PipelineError: Naming the failing stage; outputs written so far keep
            their '.partial' suffix
        FileSystemError: If the output directory cannot be prepared

    Example:
        >>> result = run_pipeline(parse_config("configs/two_disks.yaml"))
        >>> result.predicted_lines
        4
    """
    start_time = time.time()
    updates: dict[str, Any] = {}
    if seed is not None:
        updates['seed'] = seed
    if out_dir is not None:
        updates['output_dir'] = str(out_dir)
    if updates:
        base_dir = config.base_dir
        config = config.model_copy(update=updates)
        config._base_dir = base_dir

    n_threads = resolve_threads(config.threads, threads)
    run_id = run_id_for(config)
    target = ensure_output_directory(config.output_dir)
    outputs = StageOutputs(target)
    image_grid = config.grid.image_grid()
    grid = config.grid.sinogram_grid()
    window = config.display_window
    mode = config.physics.mode
    results: dict[str, Any] = {}

    logger.info("Pipeline started", mode=mode, phantom=config.phantom, out_dir=str(target),
                threads=n_threads, run_id=run_id)

    with _stage('phantom', run_id):
        phantom = resolve_phantom(config.phantom, base_dir=config.base_dir, run_id=run_id)
        if phantom.metals:
            check_metal_contrast(phantom, n=image_grid.n)
        write_text(outputs.path("phantom.yaml"), dump_phantom(phantom))
        _write_image(outputs, "phantom", render_phantom(phantom, image_grid), window)

    with _stage('project', run_id):
        data, spikes = project(phantom, config)
        ideal = radon_analytic(phantom, grid)
        metal_sino = metal_projection(phantom, grid) if phantom.metals else None
        _write_sinogram(outputs, "sinogram", data)
        _write_sinogram(outputs, "ideal", ideal, csv=False)
        if metal_sino is not None:
            _write_sinogram(outputs, "metal_sinogram", metal_sino, csv=False)
        if spikes is not None:
            write_spike_csv(spikes, outputs.path("spikes.csv"))

    with _stage('recon', run_id):
        f_ma = None
        if mode == 'beam-hardening' and metal_sino is not None and config.physics.spectrum.model == 'uniform':
            f_ma = metal_artifact_image(metal_sino, _alpha_delta(phantom, config), image_grid, threads=n_threads)
        decomposition = decompose(data, ideal, image_grid, f_ma=f_ma, threads=n_threads)
        recon = decomposition.f_ct
        results['max_linearity_residual'] = decomposition.max_linearity_residual
        _write_image(outputs, "recon", recon, window)
        _write_image(outputs, "f_ma", decomposition.f_ma, window)

    with _stage('predict', run_id):
        streak_mode = _streak_mode(mode)
        if streak_mode is None or (streak_mode == 'beam-hardening' and not phantom.metals):
            predicted = []
        else:
            predicted = predict_streaks(phantom, streak_mode, spikes=spikes)
        write_streak_csv(predicted, outputs.path("streaks.csv"))
        write_overlay(recon, predicted, outputs.path("overlay.png"), window=window)

    artifact = config.artifact
    with _stage('score', run_id):
        exclusion = build_exclusion_mask(phantom, image_grid, artifact.metal_dilation, artifact.edge_band)
        report = validate_prediction(
            recon, predicted, exclusion,
            n_controls=artifact.n_controls,
            seed=config.artifact_seed(),
            theta=artifact.theta,
            sigma=artifact.sigma,
            control_margin=artifact.control_margin
        )
        write_report(report, outputs.path("report.csv"), outputs.path("report.txt"))
        results['mean_ratio'] = report.mean_ratio

    mar_cfg = config.mar
    if mar_cfg.method != 'none' and metal_sino is not None:
        with _stage('mar', run_id):
            trace = metal_trace(metal_sino, tau_m=mar_cfg.tau_m)
            if mar_cfg.method == 'linear':
                corrected = mar_linear(data, trace)
            else:
                corrected = mar_poisson(
                    data, trace,
                    zeta_quantile=mar_cfg.zeta_quantile,
                    edge_margin=mar_cfg.edge_margin,
                    metal_sino=metal_sino if mar_cfg.metal_guard else None,
                    metal_tolerance=mar_cfg.metal_tolerance,
                    rtol=mar_cfg.rtol,
                    max_iter=mar_cfg.max_iter
                )
            mar_recon = fbp(corrected, image_grid, threads=n_threads)
            _write_sinogram(outputs, "mar_sinogram", corrected)
            _write_image(outputs, "mar_recon", mar_recon, window)
            mar_report = validate_prediction(
                mar_recon, predicted, exclusion,
                n_controls=artifact.n_controls,
                seed=config.artifact_seed(),
                theta=artifact.theta,
                sigma=artifact.sigma,
                control_margin=artifact.control_margin
            )
            write_report(mar_report, outputs.path("mar_report.csv"), outputs.path("mar_report.txt"))
            results['mean_ratio_mar'] = mar_report.mean_ratio
    elif mar_cfg.method != 'none':
        logger.warning("Phantom has no metal; MAR skipped", method=mar_cfg.method, run_id=run_id)

    with _stage('manifest', run_id):
        files = outputs.commit()
        manifest = {
            'tool': 'ctstreak',
            'version': tool_version(),
            'run_id': run_id,
            'phantom': phantom.name,
            'mode': mode,
            'config': yaml.safe_load(dump_config(config)),
            'results': {
                'predicted_lines': len(predicted),
                'detected_lines': sum(1 for m in report.measured if m.detected),
                'control_median': report.control_median,
                'mean_ratio': results.get('mean_ratio'),
                'mean_ratio_mar': results.get('mean_ratio_mar'),
                'max_linearity_residual': results.get('max_linearity_residual'),
                'streaks': [[line.phi, line.s, line.source] for line in predicted],
            },
            'files': [
                {'path': path.name, 'sha256': file_sha256(path), 'bytes': path.stat().st_size}
                for path in files
            ],
        }
        manifest_path = write_text(target / MANIFEST_NAME, yaml.safe_dump(manifest, sort_keys=False))

    logger.info(
        "Pipeline complete",
        mode=mode,
        predicted=len(predicted),
        files=len(files),
        run_id=run_id,
        duration_ms=round((time.time() - start_time) * 1000, 2)
    )
    return RunResult(
        out_dir=str(target),
        run_id=run_id,
        mode=mode,
        files=[p.name for p in files],
        predicted_lines=len(predicted),
        detected_lines=manifest['results']['detected_lines'],
        mean_ratio=results.get('mean_ratio'),
        mean_ratio_mar=results.get('mean_ratio_mar'),
        max_linearity_residual=results.get('max_linearity_residual'),
        manifest=str(manifest_path)
    )


def verify_manifest(out_dir: str | Path) -> list[str]:
    """Recompute checksums of every file listed in a run manifest.

    Returns:
        list[str]: Problems found (missing files or checksum mismatches);
            empty when the run verifies

    Raises:
        FileSystemError: If the manifest is missing
        DataValidationError: If the manifest has no file list
    """
    directory = Path(out_dir)
    manifest = read_yaml_file(directory / MANIFEST_NAME)
    entries = manifest.get('files')
    if not isinstance(entries, list):
        raise DataValidationError(message=f"{directory / MANIFEST_NAME} lists no files", data_type="manifest",
                                  constraint="files")
    problems = []
    for entry in entries:
        path = directory / entry['path']
        if not path.is_file():
            problems.append(f"missing: {entry['path']}")
        elif file_sha256(path) != entry['sha256']:
            problems.append(f"checksum mismatch: {entry['path']}")
    level = 'warning' if problems else 'info'
    getattr(logger, level)("Manifest verified", out_dir=str(directory), files=len(entries), problems=len(problems))
    return problems
