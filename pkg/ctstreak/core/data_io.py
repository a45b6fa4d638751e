"""Data File Formats

Readers and writers for the files exchanged between pipeline stages and
subcommands.

Formats:
    Raw arrays: 32-byte little-endian header '<8sIIdII' (magic b'CTSTRK01',
        rows, cols, extent, kind, reserved) followed by rows * cols
        little-endian float64 values, row-major. kind 1 is a sinogram
        (rows = n_phi, cols = n_s, extent = s_max), kind 2 an image
        (rows = cols = n, extent = fov).
    Sinogram CSV: one header line '# ctstreak-sinogram n_phi=.. n_s=.. s_max=..'
        then n_phi rows of n_s values in '%.17g'.
    PGM: binary 16-bit grayscale (P5, maxval 65535, big-endian) of the
        image clipped to a display window; the window is written to a YAML
        sidecar '<name>.window'.
    Overlay: predicted lines over a reconstruction, PNG through matplotlib's
        Agg canvas or PGM with the lines burned in.
    Streak CSV: phi_rad, s, span_dim, source, tangency_count
    Spike CSV: phi, s, c
    Report CSV: kind, phi_rad, s, source, span_dim, score, ratio, detected

Public Functions:
    write_raw, read_raw: Raw float64 sinograms and images
    write_sinogram_csv, read_sinogram_csv: Text sinograms
    write_pgm, read_pgm, read_window: Windowed 16-bit images
    write_overlay: Predicted lines drawn over an image
    write_streak_csv, read_streak_csv: Candidate streak lines
    write_spike_csv, read_spike_csv: Noise spike lists
    write_report: StreakReport CSV and text summary
    write_text: UTF-8 text file
    file_sha256: Hex digest of a file
"""

import csv
import hashlib
import math
import struct
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml
from matplotlib.figure import Figure

from .artifact import StreakReport
from .exceptions import DataValidationError, FileSystemError
from .file_reader import read_text_file, read_yaml_file
from .file_validator import validate_file
from .geometry import StreakLine
from .grid_models import ImageGrid, RasterImage, Sinogram, SinogramGrid
from .logger import get_logger
from .spectral import NoiseSpikes

logger = get_logger(__name__)


RAW_MAGIC = b'CTSTRK01'
RAW_HEADER = struct.Struct('<8sIIdII')
RAW_KIND_SINOGRAM = 1
RAW_KIND_IMAGE = 2
SINOGRAM_CSV_TAG = 'ctstreak-sinogram'
PGM_MAXVAL = 65535
FLOAT_FORMAT = '%.17g'

STREAK_COLUMNS = ['phi_rad', 's', 'span_dim', 'source', 'tangency_count']
SPIKE_COLUMNS = ['phi', 's', 'c']
REPORT_COLUMNS = ['kind', 'phi_rad', 's', 'source', 'span_dim', 'score', 'ratio', 'detected']


def _write_bytes(path: Path, payload: bytes) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as e:
        logger.error("File write failed", path=str(path), error=str(e))
        raise FileSystemError(
            message=f"Failed to write {path}: {e}",
            path=str(path),
            operation="write",
            error_code=getattr(e, 'errno', None)
        )
    return path


def _read_bytes(path: Path) -> bytes:
    validate_file(path)
    try:
        return path.read_bytes()
    except OSError as e:
        raise FileSystemError(
            message=f"Failed to read {path}: {e}",
            path=str(path),
            operation="read",
            error_code=getattr(e, 'errno', None)
        )


def write_text(file_path: str | Path, text: str) -> Path:
    return _write_bytes(Path(file_path), text.encode('utf-8'))


def file_sha256(file_path: str | Path) -> str:
    return hashlib.sha256(_read_bytes(Path(file_path))).hexdigest()


def _fmt(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def _write_csv(path: Path, columns: list[str], rows: Iterable[dict[str, Any]]) -> Path:
    lines = [','.join(columns)]
    for row in rows:
        lines.append(','.join(_fmt(row.get(col)) for col in columns))
    return write_text(path, '\n'.join(lines) + '\n')


def _read_csv(path: Path, columns: list[str]) -> list[dict[str, str]]:
    content = read_text_file(path)
    reader = csv.DictReader(content.splitlines())
    if reader.fieldnames is None or list(reader.fieldnames)[:len(columns)] != columns:
        raise DataValidationError(
            message=f"{path} must start with the columns {','.join(columns)}, found {reader.fieldnames}",
            data_type="csv",
            constraint="columns"
        )
    return list(reader)


# Raw arrays

def write_raw(data: Sinogram | RasterImage, file_path: str | Path) -> Path:
    """Write a sinogram or image in the raw float64 format."""
    if isinstance(data, Sinogram):
        kind, extent = RAW_KIND_SINOGRAM, data.grid.s_max
    else:
        kind, extent = RAW_KIND_IMAGE, data.grid.fov
    rows, cols = data.values.shape
    header = RAW_HEADER.pack(RAW_MAGIC, rows, cols, float(extent), kind, 0)
    return _write_bytes(Path(file_path), header + data.values.astype('<f8').tobytes(order='C'))


def read_raw(file_path: str | Path) -> Sinogram | RasterImage:
    """Read a raw sinogram or image.

    Raises:
        FileSystemError: File missing or unreadable
        DataValidationError: Bad magic, unknown kind or truncated payload
    """
    path = Path(file_path)
    payload = _read_bytes(path)
    if len(payload) < RAW_HEADER.size:
        raise DataValidationError(message=f"{path} is shorter than the raw header", data_type="raw",
                                  constraint="header")
    magic, rows, cols, extent, kind, _ = RAW_HEADER.unpack_from(payload)
    if magic != RAW_MAGIC:
        raise DataValidationError(message=f"{path} is not a ctstreak raw file", data_type="raw",
                                  constraint="magic", value=magic)
    expected = RAW_HEADER.size + 8 * rows * cols
    if len(payload) != expected:
        raise DataValidationError(
            message=f"{path} has {len(payload)} bytes, expected {expected}",
            data_type="raw",
            constraint="length"
        )
    values = np.frombuffer(payload, dtype='<f8', offset=RAW_HEADER.size).reshape(rows, cols).astype(float)
    if kind == RAW_KIND_SINOGRAM:
        return Sinogram(grid=SinogramGrid(n_phi=rows, n_s=cols, s_max=extent), values=values)
    if kind == RAW_KIND_IMAGE:
        if rows != cols:
            raise DataValidationError(message=f"Raw image {path} is not square", data_type="raw",
                                      constraint="square")
        return RasterImage(grid=ImageGrid(n=rows, fov=extent), values=values)
    raise DataValidationError(message=f"Unknown raw kind {kind} in {path}", data_type="raw",
                              constraint="kind", value=kind)


# Sinogram CSV

def write_sinogram_csv(sino: Sinogram, file_path: str | Path) -> Path:
    grid = sino.grid
    header = f"# {SINOGRAM_CSV_TAG} n_phi={grid.n_phi} n_s={grid.n_s} s_max={FLOAT_FORMAT % grid.s_max}"
    body = '\n'.join(','.join(FLOAT_FORMAT % v for v in row) for row in sino.values)
    return write_text(file_path, header + '\n' + body + '\n')


def read_sinogram_csv(file_path: str | Path) -> Sinogram:
    """Read a sinogram CSV; the grid comes from the header line.

    Raises:
        DataValidationError: Missing or malformed header, or a row count
            or width that disagrees with it
    """
    path = Path(file_path)
    content = read_text_file(path)
    lines = content.splitlines()
    fields = lines[0].lstrip('#').split() if lines else []
    if not fields or fields[0] != SINOGRAM_CSV_TAG:
        raise DataValidationError(
            message=f"{path} must start with '# {SINOGRAM_CSV_TAG} n_phi=.. n_s=.. s_max=..'",
            data_type="sinogram_csv",
            constraint="header"
        )
    try:
        params = dict(item.split('=', 1) for item in fields[1:])
        grid = SinogramGrid(n_phi=int(params['n_phi']), n_s=int(params['n_s']), s_max=float(params['s_max']))
        values = np.array([[float(v) for v in line.split(',')] for line in lines[1:] if line.strip()])
    except (KeyError, ValueError) as e:
        raise DataValidationError(message=f"Malformed sinogram CSV {path}: {e}", data_type="sinogram_csv",
                                  constraint="parse")
    return Sinogram(grid=grid, values=values.reshape(-1, grid.n_s) if values.size else values)


# PGM

def _window_path(path: Path) -> Path:
    return path.with_name(path.name + '.window')


def _to_uint16(values: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    low, high = window
    if not high > low:
        raise DataValidationError(message=f"Display window must be increasing, got {window}",
                                  data_type="window", constraint="order", value=window)
    scaled = np.clip((values - low) / (high - low), 0.0, 1.0)
    return np.round(scaled * PGM_MAXVAL).astype('>u2')


def _pgm_bytes(pixels: np.ndarray) -> bytes:
    rows, cols = pixels.shape
    return f"P5\n{cols} {rows}\n{PGM_MAXVAL}\n".encode('ascii') + pixels.astype('>u2').tobytes(order='C')


def write_pgm(
    image: RasterImage,
    file_path: str | Path,
    window: tuple[float, float] = (-0.02, 0.04),
    window_path: str | Path | None = None
) -> tuple[Path, Path]:
    """Write a windowed 16-bit PGM and its window sidecar.

    Returns:
        tuple[Path, Path]: PGM path and sidecar path
    """
    path = Path(file_path)
    sidecar = Path(window_path) if window_path is not None else _window_path(path)
    _write_bytes(path, _pgm_bytes(_to_uint16(image.values, window)))
    write_text(sidecar, yaml.safe_dump(
        {'low': float(window[0]), 'high': float(window[1]), 'maxval': PGM_MAXVAL, 'fov': float(image.grid.fov)},
        sort_keys=False
    ))
    return path, sidecar


def read_window(file_path: str | Path) -> tuple[float, float]:
    data = read_yaml_file(file_path)
    try:
        return float(data['low']), float(data['high'])
    except (KeyError, TypeError, ValueError):
        raise DataValidationError(message=f"Malformed window sidecar {file_path}", data_type="window",
                                  constraint="keys")


def read_pgm(file_path: str | Path) -> np.ndarray:
    """Read a binary PGM (P5) into an integer array."""
    path = Path(file_path)
    payload = _read_bytes(path)
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(payload) and payload[pos:pos + 1].isspace():
            pos += 1
        if payload[pos:pos + 1] == b'#':
            pos = payload.index(b'\n', pos) + 1
            continue
        start = pos
        while pos < len(payload) and not payload[pos:pos + 1].isspace():
            pos += 1
        tokens.append(payload[start:pos])
    if tokens[0] != b'P5':
        raise DataValidationError(message=f"{path} is not a binary PGM", data_type="pgm", constraint="magic")
    cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = '>u2' if maxval > 255 else 'u1'
    return np.frombuffer(payload, dtype=dtype, offset=pos + 1, count=rows * cols).reshape(rows, cols).astype(int)


# Overlay

def _line_endpoints(line: StreakLine, reach: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(line.phi), math.sin(line.phi)
    t = np.array([-reach, reach])
    return line.s * c - t * s, line.s * s + t * c


def write_overlay(
    image: RasterImage,
    lines: list[StreakLine],
    file_path: str | Path,
    window: tuple[float, float] = (-0.02, 0.04)
) -> Path:
    """Draw predicted lines over an image; '.png' renders with matplotlib, anything else as PGM."""
    path = Path(file_path)
    grid = image.grid
    fov = grid.fov
    reach = 2.0 * fov

    fmt = path.name.removesuffix('.partial').rsplit('.', 1)[-1].lower()
    if fmt != 'png':
        pixels = _to_uint16(image.values, window)
        step = grid.pitch / 2.0
        t = np.arange(-reach, reach + step / 2.0, step)
        for line in lines:
            c, s = math.cos(line.phi), math.sin(line.phi)
            row, col = grid.to_index(line.s * c - t * s, line.s * s + t * c)
            row, col = np.round(row).astype(int), np.round(col).astype(int)
            inside = (row >= 0) & (row < grid.n) & (col >= 0) & (col < grid.n)
            pixels[row[inside], col[inside]] = PGM_MAXVAL
        return _write_bytes(path, _pgm_bytes(pixels))

    fig = Figure(figsize=(6, 6), dpi=100)
    ax = fig.add_subplot(1, 1, 1)
    ax.imshow(image.values, cmap='gray', vmin=window[0], vmax=window[1],
              extent=(-fov, fov, -fov, fov), origin='upper', interpolation='nearest')
    for line in lines:
        xs, ys = _line_endpoints(line, reach)
        ax.plot(xs, ys, color='red', linewidth=0.8)
    ax.set_xlim(-fov, fov)
    ax.set_ylim(-fov, fov)
    ax.set_axis_off()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format='png', bbox_inches='tight', pad_inches=0, metadata={'Software': None})
    except OSError as e:
        raise FileSystemError(message=f"Failed to write overlay {path}: {e}", path=str(path), operation="write")
    return path


# Streak, spike and report CSVs

def write_streak_csv(lines: list[StreakLine], file_path: str | Path) -> Path:
    rows = [
        {'phi_rad': line.phi, 's': line.s, 'span_dim': line.span_dim, 'source': line.source,
         'tangency_count': line.tangency_count}
        for line in lines
    ]
    return _write_csv(Path(file_path), STREAK_COLUMNS, rows)


def read_streak_csv(file_path: str | Path) -> list[StreakLine]:
    """Read candidate lines; tangency events are not stored, only their count."""
    path = Path(file_path)
    try:
        return [
            StreakLine(phi=float(row['phi_rad']), s=float(row['s']), span_dim=int(row['span_dim']),
                       source=row['source'])
            for row in _read_csv(path, STREAK_COLUMNS)
        ]
    except (TypeError, ValueError) as e:
        raise DataValidationError(message=f"Malformed streak CSV {path}: {e}", data_type="streak_csv",
                                  constraint="parse")


def write_spike_csv(spikes: NoiseSpikes, file_path: str | Path) -> Path:
    rows = [{'phi': phi, 's': s, 'c': c} for phi, s, c in spikes.spikes]
    return _write_csv(Path(file_path), SPIKE_COLUMNS, rows)


def read_spike_csv(file_path: str | Path) -> NoiseSpikes:
    path = Path(file_path)
    try:
        spikes = [(float(r['phi']), float(r['s']), float(r['c'])) for r in _read_csv(path, SPIKE_COLUMNS)]
    except (TypeError, ValueError) as e:
        raise DataValidationError(message=f"Malformed spike CSV {path}: {e}", data_type="spike_csv",
                                  constraint="parse")
    return NoiseSpikes(spikes=spikes)


def write_report(
    report: StreakReport,
    csv_path: str | Path,
    summary_path: str | Path | None = None
) -> list[Path]:
    """Write the report rows as CSV and, optionally, the text summary."""
    written = [_write_csv(Path(csv_path), REPORT_COLUMNS, report.rows())]
    if summary_path is not None:
        written.append(write_text(summary_path, report.summary()))
    return written
