"""Command-Line Interface

Subcommands wrap one pipeline stage each and exchange data through the
standard file formats, so any stage can be replaced by an external tool.

Usage:
    ctstreak [--config FILE] [--out-dir DIR] [--seed N] [--threads N]
             [--log-dir DIR] [--log-level LEVEL] COMMAND [options]

Commands:
    phantom-render  Rasterise a phantom (raw + windowed PGM), optionally write its YAML
    project         Simulate projection data (sinogram raw + CSV)
    recon           Filtered backprojection of a sinogram
    predict         Print and write predicted streak lines
    score           Score streak lines in an image against random controls
    mar             Complete the metal trace of a sinogram
    report          Draw streak lines over an image
    run             Run the full pipeline from --config
    verify          Check a run directory against its manifest

Exit status is 0 on success, 1 on a processing or file error, 2 on a
usage error.
"""

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .core.artifact import MIN_CONTROLS, build_exclusion_mask, predict_streaks, validate_prediction
from .core.config_loader import parse_config, resolve_threads
from .core.config_models import PipelineConfig
from .core.data_io import (
    read_raw,
    read_sinogram_csv,
    read_spike_csv,
    read_streak_csv,
    write_overlay,
    write_pgm,
    write_raw,
    write_report,
    write_sinogram_csv,
    write_spike_csv,
    write_streak_csv,
)
from .core.exceptions import CTStreakError
from .core.file_validator import ensure_output_directory
from .core.grid_models import ImageGrid, RasterImage, Sinogram
from .core.logger import VALID_LEVELS, configure_logging, get_logger
from .core.mar import mar_linear, mar_poisson, metal_trace
from .core.phantom_loader import resolve_phantom, write_phantom
from .core.phantom_models import Phantom
from .core.pipeline import project, run_pipeline, verify_manifest
from .core.radon import fbp, metal_projection, render_phantom

logger = get_logger(__name__)


DEFAULT_WINDOW = (-0.02, 0.04)


class UsageError(Exception):
    pass


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctstreak",
        description="Simulate, predict, score and reduce metal streak artifacts in CT.",
    )
    parser.add_argument("--config", type=Path, help="pipeline configuration YAML")
    parser.add_argument("--out-dir", type=Path, help="output directory (default: config output_dir or '.')")
    parser.add_argument("--seed", type=_non_negative_int, help="override noise and control seeds")
    parser.add_argument("--threads", type=_positive_int, help="worker threads (default: config or CTSTREAK_THREADS)")
    parser.add_argument("--log-dir", type=Path, help="write ctstreak.log to this directory")
    parser.add_argument("--log-level", default="INFO", choices=sorted(VALID_LEVELS), help="console log level")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("phantom-render", help="rasterise a phantom")
    p.add_argument("--phantom", help="phantom YAML or builtin:<name> (default: config phantom)")
    p.add_argument("--n", type=_positive_int, help="image size (default: config grid or 256)")
    p.add_argument("--energy", type=float, help="render f_E at this energy (needs --e0)")
    p.add_argument("--e0", type=float, help="reference energy of the phantom values")
    p.add_argument("--supersample", type=_positive_int, default=1)
    p.add_argument("--write-yaml", type=Path, help="also write the phantom as a YAML file")

    p = sub.add_parser("project", help="simulate projection data (requires --config)")
    p.add_argument("--phantom", help="override the config phantom")
    p.add_argument("--spikes", type=Path, help="noise spike CSV (phi,s,c) instead of generated spikes")
    p.add_argument("--name", default="sinogram", help="output stem (default: sinogram)")

    p = sub.add_parser("recon", help="filtered backprojection")
    p.add_argument("--sinogram", type=Path, required=True, help="sinogram .raw or .csv")
    p.add_argument("--n", type=_positive_int, help="image size (default: config grid or 256)")
    p.add_argument("--fov", type=float, help="field-of-view half-width (default: config grid or 1.0)")
    p.add_argument("--no-pad", action="store_true", help="circular ramp filter without zero padding")
    p.add_argument("--name", default="recon", help="output stem (default: recon)")

    p = sub.add_parser("predict", help="predict streak lines")
    p.add_argument("--phantom", help="phantom YAML or builtin:<name> (default: config phantom)")
    p.add_argument("--mode", choices=["beam-hardening", "scatter", "noise"],
                   help="physics mode (default: from config, else beam-hardening)")
    p.add_argument("--spikes", type=Path, help="spike CSV for noise mode")
    p.add_argument("--name", default="streaks.csv", help="output CSV name")

    p = sub.add_parser("score", help="score streak lines in an image")
    p.add_argument("--image", type=Path, required=True, help="reconstruction .raw")
    p.add_argument("--streaks", type=Path, required=True, help="streak CSV")
    p.add_argument("--phantom", help="phantom for the exclusion mask (default: config phantom)")
    p.add_argument("--n-controls", type=int, help=f"control lines, >= {MIN_CONTROLS} (default: config or 200)")
    p.add_argument("--theta", type=float, help="detection ratio threshold")
    p.add_argument("--sigma", type=float, help="high-pass width in pixels")
    p.add_argument("--name", default="report", help="output stem (default: report)")

    p = sub.add_parser("mar", help="metal artifact reduction in the sinogram")
    p.add_argument("--sinogram", type=Path, required=True, help="sinogram .raw or .csv")
    p.add_argument("--metal-sinogram", type=Path, help="R chi_D .raw (default: computed from --phantom)")
    p.add_argument("--phantom", help="phantom used to compute R chi_D")
    p.add_argument("--method", choices=["linear", "poisson"], help="default: config mar.method or linear")
    p.add_argument("--tau-m", type=float, help="metal threshold on R chi_D")
    p.add_argument("--zeta-quantile", type=float, help="Poisson Laplacian keep quantile in [0, 1]")
    p.add_argument("--name", default="mar_sinogram", help="output stem (default: mar_sinogram)")

    p = sub.add_parser("report", help="draw streak lines over an image")
    p.add_argument("--image", type=Path, required=True, help="image .raw")
    p.add_argument("--streaks", type=Path, help="streak CSV (default: no lines)")
    p.add_argument("--window", type=float, nargs=2, metavar=("LOW", "HIGH"), help="display window")
    p.add_argument("--name", default="overlay.png", help="output name; .png or .pgm")

    sub.add_parser("run", help="run the full pipeline (requires --config)")

    p = sub.add_parser("verify", help="verify a run directory against its manifest")
    p.add_argument("run_dir", type=Path, nargs="?", help="run directory (default: --out-dir)")
    return parser


# Helpers

def _config(args: argparse.Namespace, required: bool = False) -> PipelineConfig | None:
    if args.config is None:
        if required:
            raise UsageError(f"'{args.command}' requires --config")
        return None
    return parse_config(args.config)


def _out_dir(args: argparse.Namespace, config: PipelineConfig | None) -> Path:
    if args.out_dir is not None:
        return ensure_output_directory(args.out_dir)
    return ensure_output_directory(config.output_dir if config is not None else ".")


def _phantom(args: argparse.Namespace, config: PipelineConfig | None) -> Phantom:
    reference = getattr(args, "phantom", None)
    if reference is not None:
        return resolve_phantom(reference)
    if config is None:
        raise UsageError(f"'{args.command}' needs --phantom or --config")
    return resolve_phantom(config.phantom, base_dir=config.base_dir)


def _read_sinogram(path: Path) -> Sinogram:
    data = read_sinogram_csv(path) if path.suffix.lower() == ".csv" else read_raw(path)
    if not isinstance(data, Sinogram):
        raise UsageError(f"{path} holds an image, not a sinogram")
    return data


def _read_image(path: Path) -> RasterImage:
    data = read_raw(path)
    if not isinstance(data, RasterImage):
        raise UsageError(f"{path} holds a sinogram, not an image")
    return data


def _window(config: PipelineConfig | None) -> tuple[float, float]:
    return config.display_window if config is not None else DEFAULT_WINDOW


def _threads(args: argparse.Namespace, config: PipelineConfig | None) -> int:
    return resolve_threads(config.threads if config is not None else None, args.threads)


def _print_lines(lines: list) -> None:
    print(f"{len(lines)} predicted line(s)")
    for line in lines:
        print(f"phi={line.phi:+.12f} s={line.s:+.12f} span_dim={line.span_dim} "
              f"source={line.source} tangencies={line.tangency_count}")


# Subcommands

def cmd_phantom_render(args: argparse.Namespace) -> int:
    config = _config(args)
    phantom = _phantom(args, config)
    if (args.energy is None) != (args.e0 is None):
        raise UsageError("--energy and --e0 must be given together")
    grid = config.grid.image_grid() if config is not None else ImageGrid(n=256, fov=phantom.fov)
    if args.n is not None:
        grid = ImageGrid(n=args.n, fov=grid.fov)
    image = render_phantom(phantom, grid, energy=args.energy, e0=args.e0, supersample=args.supersample)
    out = _out_dir(args, config)
    write_raw(image, out / "phantom.raw")
    write_pgm(image, out / "phantom.pgm", window=_window(config))
    if args.write_yaml is not None:
        write_phantom(phantom, args.write_yaml)
    print(f"wrote {out / 'phantom.raw'} and {out / 'phantom.pgm'}")
    return 0


def cmd_project(args: argparse.Namespace) -> int:
    config = _config(args, required=True)
    if args.seed is not None:
        config = config.model_copy(update={'seed': args.seed})
    phantom = _phantom(args, config)
    spikes = read_spike_csv(args.spikes) if args.spikes is not None else None
    data, used = project(phantom, config, spikes=spikes)
    out = _out_dir(args, config)
    write_raw(data, out / f"{args.name}.raw")
    write_sinogram_csv(data, out / f"{args.name}.csv")
    if used is not None:
        write_spike_csv(used, out / "spikes.csv")
    print(f"wrote {out / (args.name + '.raw')} ({config.physics.mode})")
    return 0


def cmd_recon(args: argparse.Namespace) -> int:
    config = _config(args)
    sino = _read_sinogram(args.sinogram)
    n = args.n or (config.grid.n if config is not None else 256)
    fov = args.fov or (config.grid.fov if config is not None else 1.0)
    image = fbp(sino, ImageGrid(n=n, fov=fov), threads=_threads(args, config), pad=not args.no_pad)
    out = _out_dir(args, config)
    write_raw(image, out / f"{args.name}.raw")
    write_pgm(image, out / f"{args.name}.pgm", window=_window(config))
    print(f"wrote {out / (args.name + '.raw')}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    config = _config(args)
    phantom = _phantom(args, config)
    mode = args.mode
    if mode is None:
        config_mode = config.physics.mode if config is not None else 'beam-hardening'
        mode = 'beam-hardening' if config_mode == 'monochromatic' else config_mode
    spikes = None
    if mode == 'noise':
        if args.spikes is None:
            raise UsageError("noise mode needs --spikes")
        spikes = read_spike_csv(args.spikes)
    lines = predict_streaks(phantom, mode, spikes=spikes)
    out = _out_dir(args, config)
    write_streak_csv(lines, out / args.name)
    _print_lines(lines)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    config = _config(args)
    artifact = config.artifact if config is not None else None
    n_controls = args.n_controls if args.n_controls is not None else (artifact.n_controls if artifact else 200)
    if n_controls < MIN_CONTROLS:
        raise UsageError(f"--n-controls must be >= {MIN_CONTROLS}, got {n_controls}")
    image = _read_image(args.image)
    lines = read_streak_csv(args.streaks)
    phantom = _phantom(args, config) if (args.phantom or config is not None) else None
    mask = None
    if phantom is not None:
        dilation = artifact.metal_dilation if artifact else 3
        band = artifact.edge_band if artifact else 2
        mask = build_exclusion_mask(phantom, image.grid, dilation, band)
    if args.seed is not None:
        seed = args.seed
    else:
        seed = config.artifact_seed() if config is not None else 0
    report = validate_prediction(
        image, lines, mask,
        n_controls=n_controls,
        seed=seed,
        theta=args.theta if args.theta is not None else (artifact.theta if artifact else 2.0),
        sigma=args.sigma if args.sigma is not None else (artifact.sigma if artifact else 2.0),
        control_margin=artifact.control_margin if artifact else 3.0
    )
    out = _out_dir(args, config)
    write_report(report, out / f"{args.name}.csv", out / f"{args.name}.txt")
    print(report.summary(), end="")
    return 0


def cmd_mar(args: argparse.Namespace) -> int:
    config = _config(args)
    mar_cfg = config.mar if config is not None else None
    sino = _read_sinogram(args.sinogram)
    if args.metal_sinogram is not None:
        metal = _read_sinogram(args.metal_sinogram)
    else:
        metal = metal_projection(_phantom(args, config), sino.grid)
    method = args.method or (mar_cfg.method if mar_cfg and mar_cfg.method != 'none' else 'linear')
    tau_m = args.tau_m if args.tau_m is not None else (mar_cfg.tau_m if mar_cfg else None)
    trace = metal_trace(metal, tau_m=tau_m)
    if method == 'poisson':
        zeta = args.zeta_quantile if args.zeta_quantile is not None else (mar_cfg.zeta_quantile if mar_cfg else 0.9)
        if not 0.0 <= zeta <= 1.0:
            raise UsageError(f"--zeta-quantile must lie in [0, 1], got {zeta}")
        kwargs = {"metal_sino": metal}
        if mar_cfg is not None:
            kwargs = dict(
                edge_margin=mar_cfg.edge_margin,
                metal_sino=metal if mar_cfg.metal_guard else None,
                metal_tolerance=mar_cfg.metal_tolerance,
                rtol=mar_cfg.rtol,
                max_iter=mar_cfg.max_iter
            )
        corrected = mar_poisson(sino, trace, zeta_quantile=zeta, **kwargs)
    else:
        corrected = mar_linear(sino, trace)
    out = _out_dir(args, config)
    write_raw(corrected, out / f"{args.name}.raw")
    write_sinogram_csv(corrected, out / f"{args.name}.csv")
    print(f"wrote {out / (args.name + '.raw')} ({method})")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _config(args)
    image = _read_image(args.image)
    lines = read_streak_csv(args.streaks) if args.streaks is not None else []
    window = tuple(args.window) if args.window is not None else _window(config)
    out = _out_dir(args, config)
    path = write_overlay(image, lines, out / args.name, window=window)
    print(f"wrote {path} ({len(lines)} line(s))")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _config(args, required=True)
    result = run_pipeline(config, out_dir=args.out_dir, seed=args.seed, threads=args.threads)
    print(f"run {result.run_id}: mode={result.mode} predicted={result.predicted_lines} "
          f"detected={result.detected_lines} files={len(result.files)}")
    print(f"manifest: {result.manifest}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    run_dir = args.run_dir or args.out_dir
    if run_dir is None:
        raise UsageError("'verify' needs a run directory")
    problems = verify_manifest(run_dir)
    for problem in problems:
        print(problem)
    print("ok" if not problems else f"{len(problems)} problem(s)")
    return 0 if not problems else 1


COMMANDS = {
    "phantom-render": cmd_phantom_render,
    "project": cmd_project,
    "recon": cmd_recon,
    "predict": cmd_predict,
    "score": cmd_score,
    "mar": cmd_mar,
    "report": cmd_report,
    "run": cmd_run,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        configure_logging(log_dir=args.log_dir, console_level=args.log_level)
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"ctstreak {args.command}: error: {e}", file=sys.stderr)
        return 2
    except CTStreakError as e:
        logger.error("Command failed", command=args.command, error=e.message)
        print(f"ctstreak {args.command}: error: {e.message}", file=sys.stderr)
        return 1
