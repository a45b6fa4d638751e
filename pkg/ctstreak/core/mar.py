"""Metal Artifact Reduction Module

Sinogram-domain completion of metal-corrupted samples. The metal trace is
the per-angle set of detector runs crossed by metal; both methods replace
the samples inside the trace and keep every sample outside it bit for bit.

Methods:
    linear:  per angle, the straight line between the two exterior
             neighbours of each run
    poisson: a 2-D Poisson problem over the whole trace (periodic in phi)
             with Dirichlet data from the exterior and a right-hand side
             that keeps only the strongest Laplacian responses of the data

Public Classes:
    MetalTrace: Per-angle detector runs

Public Functions:
    metal_trace: Trace from a metal sinogram by thresholding
    mar_linear: Linear interpolation completion
    mar_poisson: Poisson completion
"""

import time
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import sparse
from scipy.ndimage import binary_erosion
from scipy.sparse.linalg import cg

from .exceptions import DataValidationError, GridError, SolverError
from .grid_models import Sinogram, SinogramGrid
from .logger import get_logger

logger = get_logger(__name__)


Run = tuple[int, int]


class MetalTrace(BaseModel):
    """Per-angle sorted, disjoint inclusive index runs (start, stop).

    Every run has an exterior neighbour on both sides: runs never touch the
    detector ends and consecutive runs are separated by at least one bin.
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    grid: SinogramGrid
    runs: list[list[Run]]
    source: Literal['analytic', 'provided'] = 'provided'

    @model_validator(mode='after')
    def validate_runs(self) -> 'MetalTrace':
        if len(self.runs) != self.grid.n_phi:
            raise GridError(
                message=f"Trace has {len(self.runs)} angle rows, grid has {self.grid.n_phi}",
                field="runs",
                constraint="shape"
            )
        last = self.grid.n_s - 1
        for k, row in enumerate(self.runs):
            prev_stop = None
            for start, stop in row:
                if start > stop:
                    raise GridError(message=f"Empty run ({start}, {stop}) at angle {k}", field="runs",
                                    constraint="ordered")
                if start <= 0 or stop >= last:
                    raise GridError(
                        message=f"Metal trace touches the detector boundary at angle index {k}; "
                                "enlarge s_max so the metal projection has exterior samples",
                        field="runs",
                        constraint="detector_edge"
                    )
                if prev_stop is not None and start < prev_stop + 2:
                    raise GridError(
                        message=f"Runs at angle {k} overlap or touch: ({start}, {stop}) after stop {prev_stop}",
                        field="runs",
                        constraint="disjoint"
                    )
                prev_stop = stop
        return self

    @property
    def is_empty(self) -> bool:
        return not any(self.runs)

    def mask(self) -> np.ndarray:
        """Boolean (n_phi, n_s) mask of trace samples."""
        out = np.zeros(self.grid.shape, dtype=bool)
        for k, row in enumerate(self.runs):
            for start, stop in row:
                out[k, start:stop + 1] = True
        return out

    @classmethod
    def from_mask(cls, grid: SinogramGrid, mask: np.ndarray, source: str = 'provided') -> 'MetalTrace':
        """Trace from a boolean mask, one run per connected stretch in each row."""
        runs = []
        for row in np.asarray(mask, dtype=bool):
            padded = np.concatenate([[False], row, [False]]).astype(np.int8)
            edges = np.flatnonzero(np.diff(padded))
            runs.append([(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])])
        return cls(grid=grid, runs=runs, source=source)


def metal_trace(metal_sino: Sinogram, tau_m: float | None = None, dilation: int = 1) -> MetalTrace:
    """Threshold R chi_D into per-angle runs.

    Args:
        metal_sino: R chi_D, non-negative
        tau_m: Chord threshold; defaults to half a detector spacing
        dilation: Bins added on each side of every run

    Returns:
        MetalTrace: Runs where R chi_D > tau_m, dilated

    Raises:
        DataValidationError: If the metal sinogram is negative
        GridError: If a run touches the detector ends
    """
    if np.any(metal_sino.values < -1e-12):
        raise DataValidationError(
            message="Metal sinogram must be non-negative",
            data_type="sinogram",
            constraint="non_negative"
        )
    grid = metal_sino.grid
    tau = grid.h_s / 2.0 if tau_m is None else tau_m
    mask = metal_sino.values > tau
    for _ in range(max(0, dilation)):
        grown = mask.copy()
        grown[:, 1:] |= mask[:, :-1]
        grown[:, :-1] |= mask[:, 1:]
        mask = grown
    trace = MetalTrace.from_mask(grid, mask, source='analytic')
    logger.debug("Metal trace extracted", tau_m=tau, samples=int(mask.sum()))
    return trace


def _check_grid(data: Sinogram, trace: MetalTrace) -> None:
    if data.grid != trace.grid:
        raise GridError(message="Sinogram and metal trace grids differ", field="grid", constraint="match")


def mar_linear(data: Sinogram, trace: MetalTrace) -> Sinogram:
    """Replace each run by the line joining its two exterior neighbours.

    Args:
        data: Projection data P
        trace: Metal trace on the same grid

    Returns:
        Sinogram: Completed data, identical to P outside the trace
    """
    _check_grid(data, trace)
    out = data.values.copy()
    for k, row in enumerate(trace.runs):
        for start, stop in row:
            left, right = data.values[k, start - 1], data.values[k, stop + 1]
            idx = np.arange(start, stop + 1)
            frac = (idx - (start - 1)) / (stop - start + 2)
            out[k, start:stop + 1] = left + frac * (right - left)
    return data.with_values(out, mar='linear')


def _laplacian(values: np.ndarray, h_phi: float, h_s: float) -> np.ndarray:
    """5-point Laplacian, periodic in phi; the s-boundary columns are left at zero."""
    lap = np.zeros_like(values)
    lap += (np.roll(values, -1, axis=0) - 2.0 * values + np.roll(values, 1, axis=0)) / h_phi ** 2
    lap[:, 1:-1] += (values[:, 2:] - 2.0 * values[:, 1:-1] + values[:, :-2]) / h_s ** 2
    lap[:, [0, -1]] = 0.0
    return lap


def mar_poisson(
    data: Sinogram,
    trace: MetalTrace,
    zeta_quantile: float = 0.9,
    edge_margin: int = 0,
    metal_sino: Sinogram | None = None,
    metal_tolerance: float = 0.01,
    rtol: float = 1e-10,
    max_iter: int = 20000
) -> Sinogram:
    """Complete the trace by solving a Poisson equation.

    Solves lap(u) = zeta(lap(P)) on the trace samples with u = P on the
    exterior. zeta keeps Laplacian entries whose magnitude is at or above the
    `zeta_quantile` quantile of the candidate magnitudes and zeroes the rest.
    Candidates are the trace samples, minus those within `edge_margin` bins
    (along s) of the exterior and, when `metal_sino` is given, minus the
    metal shadow (R chi_D > 0) and the samples where |lap(R chi_D)| exceeds
    `metal_tolerance` times its maximum over the trace. A quantile of 1 gives
    the discrete harmonic fill; a quantile of 0 with no margin and no metal
    sinogram reproduces P.

    Args:
        data: Projection data P
        trace: Metal trace on the same grid
        zeta_quantile: Keep fraction threshold in [0, 1]
        edge_margin: Bins next to the exterior whose Laplacian is dropped
        metal_sino: R chi_D on the same grid; enables the metal guard
        metal_tolerance: Relative metal Laplacian level above which entries are dropped
        rtol: Relative residual target of the conjugate-gradient solve
        max_iter: Iteration cap

    Returns:
        Sinogram: Completed data, identical to P outside the trace

    Raises:
        DataValidationError: If zeta_quantile is outside [0, 1]
        GridError: If the metal sinogram grid differs from the data grid
        SolverError: If CG does not reach `rtol` within `max_iter`

    Example:
        >>> fixed = mar_poisson(p, metal_trace(rchi), zeta_quantile=0.9, metal_sino=rchi)
    """
    _check_grid(data, trace)
    if not 0.0 <= zeta_quantile <= 1.0:
        raise DataValidationError(
            message=f"zeta_quantile must lie in [0, 1], got {zeta_quantile}",
            data_type="mar",
            constraint="zeta_quantile",
            value=zeta_quantile
        )
    if metal_sino is not None and metal_sino.grid != data.grid:
        raise GridError(message="Metal sinogram and data grids differ", field="grid", constraint="match")
    if trace.is_empty:
        return data.with_values(data.values.copy(), mar='poisson')

    start_time = time.time()
    grid = data.grid
    h_phi, h_s = grid.h_phi, grid.h_s
    mask = trace.mask()
    values = data.values

    lap = _laplacian(values, h_phi, h_s)
    rhs_full = np.zeros_like(values)
    if zeta_quantile < 1.0:
        candidates = mask.copy()
        if edge_margin > 0:
            candidates &= binary_erosion(mask, structure=np.ones((1, 3), dtype=bool), iterations=edge_margin)
        if metal_sino is not None:
            metal_lap = np.abs(_laplacian(metal_sino.values, h_phi, h_s))
            peak = float(metal_lap[mask].max())
            candidates &= metal_sino.values <= 1e-12
            if peak > 0.0:
                candidates &= metal_lap <= metal_tolerance * peak
        if candidates.any():
            threshold = np.quantile(np.abs(lap[candidates]), zeta_quantile)
            keep = candidates & (np.abs(lap) >= threshold)
            rhs_full[keep] = lap[keep]

    n_phi, n_s = grid.shape
    index = -np.ones(grid.shape, dtype=np.int64)
    nodes = np.argwhere(mask)
    index[mask] = np.arange(len(nodes))

    rows, cols, vals = [], [], []
    b = rhs_full[mask].copy()
    diag = 2.0 / h_phi ** 2 + 2.0 / h_s ** 2
    for i, (k, j) in enumerate(nodes):
        rows.append(i)
        cols.append(i)
        vals.append(diag)
        for nk, nj, w in (
            ((k + 1) % n_phi, j, 1.0 / h_phi ** 2),
            ((k - 1) % n_phi, j, 1.0 / h_phi ** 2),
            (k, j + 1, 1.0 / h_s ** 2),
            (k, j - 1, 1.0 / h_s ** 2),
        ):
            m = index[nk, nj]
            if m >= 0:
                rows.append(i)
                cols.append(int(m))
                vals.append(-w)
            else:
                b[i] -= w * values[nk, nj]
    # Negated Laplacian: symmetric positive definite
    system = sparse.csr_matrix((vals, (rows, cols)), shape=(len(nodes), len(nodes)))
    x0 = mar_linear(data, trace).values[mask]
    solution, info = cg(system, -b, x0=x0, rtol=rtol, maxiter=max_iter)

    residual = float(np.linalg.norm(system @ solution + b) / max(np.linalg.norm(b), np.finfo(float).tiny))
    if info != 0:
        logger.error("Poisson MAR did not converge", residual=residual, max_iter=max_iter)
        raise SolverError(
            message=f"Conjugate gradient did not converge in {max_iter} iterations (relative residual {residual:.3e})",
            solver="cg",
            residual=residual,
            iterations=max_iter
        )

    out = values.copy()
    out[mask] = solution
    logger.debug(
        "Poisson MAR solved",
        unknowns=len(nodes),
        kept=int(np.count_nonzero(rhs_full)),
        residual=residual,
        duration_ms=round((time.time() - start_time) * 1000, 2)
    )
    return data.with_values(out, mar='poisson', zeta_quantile=zeta_quantile)
