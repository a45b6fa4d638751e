"""Streak Geometry Module

Exact line/boundary analysis for metal regions. A line L(phi, s) produces a
streak when it touches the metal boundary at two or more distinct points
along its own direction; this module finds those touching points per
primitive (smooth arcs, straight edges, corners) and enumerates every
candidate line with that property.

Tangency kinds:
    smooth-arc:   the line is tangent to a disk, ellipse or sector arc
    edge-segment: the line contains a straight edge (covers a t-interval)
    vertex-fan:   the line passes through a corner with its normal inside
                  the cone spanned by the two adjacent outward normals

Public Functions:
    canonical_line: Normalise (phi, s) so phi lies in (-pi/2, pi/2]
    same_line: Compare two lines within the dedup tolerance
    line_tangencies: Tangency events of one line with a metal region
    enumerate_streak_candidates: All lines touching the metals twice
    is_strictly_convex: Strict convexity of a single-primitive region
"""

import math
import time
from itertools import combinations
from collections.abc import Sequence
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import bisect

from .exceptions import GeometryError
from .logger import get_logger
from .phantom_models import Disk, Ellipse, MetalRegion, Polygon, Sector

logger = get_logger(__name__)


# Tolerances, relative to the field-of-view half-width
TANGENCY_TOL = 1e-9
AMBIGUOUS_TOL = 1e-6
DEDUP_S_TOL = 1e-6
DISTINCT_T_TOL = 1e-7
# Absolute angular tolerances (radians)
DEDUP_PHI_TOL = 1e-6
ANGLE_TOL = 1e-9
# Sampling density for support-function root bracketing
ROOT_SAMPLES = 2048

EventKind = Literal['smooth-arc', 'edge-segment', 'vertex-fan']
LineSource = Literal['geometry', 'scatter', 'noise-spike']


class TangencyEvent(BaseModel):
    """A boundary point where the line's normal is a singular direction.

    `t` is the coordinate of the point along theta_perp; edge events also
    carry the covered `t_interval`. Events whose residual lies between the
    exact and the ambiguous tolerance are kept but `flagged`.
    """

    model_config = ConfigDict(frozen=True)

    point: tuple[float, float]
    t: float
    kind: EventKind
    t_interval: tuple[float, float] | None = None
    flagged: bool = False
    residual: float = 0.0

    @model_validator(mode='after')
    def validate_event(self) -> 'TangencyEvent':
        if not math.isfinite(self.t):
            raise GeometryError(message="Tangency parameter must be finite", constraint="t_finite")
        if self.kind == 'edge-segment':
            if self.t_interval is None or not self.t_interval[1] > self.t_interval[0]:
                raise GeometryError(
                    message=f"Edge event needs a nondegenerate t-interval, got {self.t_interval}",
                    constraint="edge_interval"
                )
        return self

    def t_values(self) -> tuple[float, ...]:
        return self.t_interval if self.t_interval is not None else (self.t,)


class StreakLine(BaseModel):
    """A line L(phi, s) with its tangency evidence.

    `span_dim` is 2 when the unflagged tangencies cover at least two
    distinct t values. Noise-spike lines carry no tangencies; a point
    impulse in the sinogram is singular in every direction so they are
    recorded with span_dim 2.
    """

    model_config = ConfigDict(frozen=True)

    phi: float
    s: float
    tangencies: list[TangencyEvent] = []
    span_dim: Literal[1, 2]
    source: LineSource = 'geometry'

    @property
    def tangency_count(self) -> int:
        return len(self.tangencies)


def canonical_line(phi: float, s: float) -> tuple[float, float]:
    """Map (phi, s) to the equivalent label with phi in (-pi/2, pi/2].

    Example:
        >>> canonical_line(math.pi, 1.0)
        (0.0, -1.0)
    """
    phi = math.remainder(phi, 2.0 * math.pi)
    if phi > math.pi / 2.0:
        phi, s = phi - math.pi, -s
    elif phi <= -math.pi / 2.0:
        phi, s = phi + math.pi, -s
    if phi <= -math.pi / 2.0:
        phi, s = phi + math.pi, -s
    return phi, s


def same_line(
    a: tuple[float, float],
    b: tuple[float, float],
    fov: float = 1.0,
    phi_tol: float = DEDUP_PHI_TOL,
    s_tol: float = DEDUP_S_TOL
) -> bool:
    """Whether two (phi, s) labels name the same line within tolerance."""
    pa, sa = canonical_line(*a)
    pb, sb = canonical_line(*b)
    if abs(pa - pb) < phi_tol and abs(sa - sb) < s_tol * fov:
        return True
    # Labels straddling phi = +-pi/2
    if abs(abs(pa - pb) - math.pi) < phi_tol and abs(sa + sb) < s_tol * fov:
        return True
    return False


def distinct_t_count(events: list[TangencyEvent], fov: float = 1.0) -> int:
    """Number of distinct t values covered by the unflagged events."""
    ts = sorted(t for ev in events if not ev.flagged for t in ev.t_values())
    if not ts:
        return 0
    count = 1
    for prev, cur in zip(ts, ts[1:]):
        if cur - prev > DISTINCT_T_TOL * fov:
            count += 1
    return count


# Boundary pieces

def _unit(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def _edges(prim: Any) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Straight edges as (start, end, outward normal)."""
    if isinstance(prim, Polygon):
        return prim.edges()
    if isinstance(prim, Sector):
        c, a, b = prim.corner_points()
        n1, n2 = prim.edge_normals()
        return [(c, a, n1), (b, c, n2)]
    return []


def _corners(prim: Any) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Corners as (vertex, incoming normal, outgoing normal)."""
    if isinstance(prim, Polygon):
        edges = prim.edges()
        return [(edges[i][0], edges[i - 1][2], edges[i][2]) for i in range(len(edges))]
    if isinstance(prim, Sector):
        c, a, b = prim.corner_points()
        n1, n2 = prim.edge_normals()
        return [(c, n2, n1), (a, n1, _unit(prim.start)), (b, _unit(prim.end), n2)]
    return []


def _in_cone(direction: np.ndarray, n_in: np.ndarray, n_out: np.ndarray) -> bool:
    """Whether `direction` lies in the closed shorter cone from n_in to n_out."""
    a_in = math.atan2(n_in[1], n_in[0])
    span = math.remainder(math.atan2(n_out[1], n_out[0]) - a_in, 2.0 * math.pi)
    rel = math.remainder(math.atan2(direction[1], direction[0]) - a_in, 2.0 * math.pi)
    if span >= 0:
        return -ANGLE_TOL <= rel <= span + ANGLE_TOL
    return span - ANGLE_TOL <= rel <= ANGLE_TOL


def _primitive_events(
    prim: Any,
    theta: np.ndarray,
    perp: np.ndarray,
    s: float,
    eps_t: float,
    eps_amb: float
) -> list[TangencyEvent]:
    events = []

    if isinstance(prim, (Disk, Sector)):
        c = np.asarray(prim.center, dtype=float)
        d = s - theta @ c
        residual = abs(abs(d) - prim.radius)
        if residual <= eps_amb:
            side = 1.0 if d >= 0 else -1.0
            point = c + side * prim.radius * theta
            on_arc = True
            if isinstance(prim, Sector):
                # Arc endpoints are corners and are handled below
                on_arc = prim.in_arc_range(math.atan2(side * theta[1], side * theta[0]), tol=-ANGLE_TOL)
            if on_arc:
                events.append(TangencyEvent(
                    point=(float(point[0]), float(point[1])),
                    t=float(point @ perp),
                    kind='smooth-arc',
                    flagged=bool(residual > eps_t),
                    residual=residual
                ))

    elif isinstance(prim, Ellipse):
        c = np.asarray(prim.center, dtype=float)
        a, b = prim.axes
        u = _unit(prim.angle)
        v = np.array([-u[1], u[0]])
        h = float(prim.support(theta[0], theta[1]))
        d = s - theta @ c
        residual = abs(abs(d) - h)
        if residual <= eps_amb:
            side = 1.0 if d >= 0 else -1.0
            point = c + side * (a ** 2 * (theta @ u) * u + b ** 2 * (theta @ v) * v) / h
            events.append(TangencyEvent(
                point=(float(point[0]), float(point[1])),
                t=float(point @ perp),
                kind='smooth-arc',
                flagged=bool(residual > eps_t),
                residual=residual
            ))

    for p0, p1, _ in _edges(prim):
        r0 = abs(s - theta @ p0)
        r1 = abs(s - theta @ p1)
        if max(r0, r1) <= eps_amb:
            t0, t1 = float(p0 @ perp), float(p1 @ perp)
            mid = 0.5 * (p0 + p1)
            events.append(TangencyEvent(
                point=(float(mid[0]), float(mid[1])),
                t=0.5 * (t0 + t1),
                kind='edge-segment',
                t_interval=(min(t0, t1), max(t0, t1)),
                flagged=bool(max(r0, r1) > eps_t),
                residual=max(r0, r1)
            ))

    for vertex, n_in, n_out in _corners(prim):
        residual = abs(s - theta @ vertex)
        if residual <= eps_amb and (_in_cone(theta, n_in, n_out) or _in_cone(-theta, n_in, n_out)):
            events.append(TangencyEvent(
                point=(float(vertex[0]), float(vertex[1])),
                t=float(vertex @ perp),
                kind='vertex-fan',
                flagged=bool(residual > eps_t),
                residual=residual
            ))

    return events


def _primitives_of(region: Any) -> list[Any]:
    """Primitives of a metal region, or a plain primitive list used as a region."""
    return list(region.primitives) if isinstance(region, MetalRegion) else list(region)


def _region_events(
    primitives: Sequence[Any],
    phi: float,
    s: float,
    fov: float
) -> tuple[list[TangencyEvent], list[TangencyEvent]]:
    """Events of a line with a region, as (kept, discarded-as-interior)."""
    theta = np.array([math.cos(phi), math.sin(phi)])
    perp = np.array([-theta[1], theta[0]])
    eps_t = TANGENCY_TOL * fov
    eps_amb = AMBIGUOUS_TOL * fov

    kept, discarded = [], []
    for idx, prim in enumerate(primitives):
        for event in _primitive_events(prim, theta, perp, s, eps_t, eps_amb):
            covered = any(
                float(other.margin(event.point)) > eps_t
                for j, other in enumerate(primitives) if j != idx
            )
            (discarded if covered else kept).append(event)
    return kept, discarded


def line_tangencies(region: MetalRegion, phi: float, s: float, fov: float = 1.0) -> list[TangencyEvent]:
    """Find the tangency events of line L(phi, s) with a metal region.

    Each primitive contributes smooth-arc events (tangent to a disk, ellipse
    or the interior of a sector arc), edge-segment events (line contains a
    straight edge) and vertex-fan events (line through a corner with the
    normal in the corner's cone). Events strictly inside another primitive
    of the region are discarded since only the boundary of the union is
    singular.

    Args:
        region: Metal region to test
        phi: Line normal angle in radians
        s: Signed line offset
        fov: Field-of-view half-width used to scale tolerances

    Returns:
        list[TangencyEvent]: Events in primitive order. Near-tangencies
            within the ambiguous tolerance are returned with `flagged=True`.

    Raises:
        GeometryError: If the region has no primitives

    Example:
        >>> region = MetalRegion(primitives=[Disk(center=(0, 0), radius=1)], alpha=[-1])
        >>> [e.point for e in line_tangencies(region, 0.0, 1.0)]
        [(1.0, 0.0)]
    """
    if not region.primitives:
        raise GeometryError(message=f"Region '{region.label}' is empty", constraint="nonempty")

    kept, _ = _region_events(region.primitives, phi, s, fov)
    flagged = sum(1 for e in kept if e.flagged)
    if flagged:
        logger.debug("Ambiguous tangency within tolerance", region=region.label, phi=phi, s=s, flagged=flagged)
    return kept


def is_strictly_convex(region: MetalRegion) -> bool:
    """Strict convexity of a single-primitive region.

    Disks and ellipses are strictly convex; polygons and sectors contain
    straight edges and are not.

    Raises:
        GeometryError: If the region has more than one primitive
    """
    if len(region.primitives) != 1:
        raise GeometryError(
            message=f"Strict convexity is only decided for single-primitive regions "
                    f"('{region.label}' has {len(region.primitives)})",
            constraint="single_primitive"
        )
    return isinstance(region.primitives[0], (Disk, Ellipse))


# Candidate generation

def _support_value(body: Any, phi: np.ndarray) -> np.ndarray:
    """H(phi) = max over the body of x . theta for a disk, sector circle or ellipse."""
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    cx, cy = body.center
    if isinstance(body, Ellipse):
        return cx * cos_phi + cy * sin_phi + body.support(cos_phi, sin_phi)
    return cx * cos_phi + cy * sin_phi + body.radius


def _circle_pair_lines(c1: np.ndarray, r1: float, c2: np.ndarray, r2: float) -> list[tuple[float, float]]:
    """Common tangents of two circles (up to four)."""
    delta = c2 - c1
    dist = math.hypot(delta[0], delta[1])
    if dist <= 0:
        return []
    gamma = math.atan2(delta[1], delta[0])
    lines = []
    for k in (r1 - r2, r1 + r2):
        ratio = k / dist
        if abs(ratio) > 1.0 + 1e-12:
            continue
        beta = math.acos(max(-1.0, min(1.0, ratio)))
        for phi in {gamma + beta, gamma - beta}:
            lines.append((phi, math.cos(phi) * c1[0] + math.sin(phi) * c1[1] + r1))
    return lines


def _support_pair_lines(body1: Any, body2: Any) -> list[tuple[float, float]]:
    """Common tangents of two smooth convex bodies via support-function roots.

    External tangents solve H1(phi) = H2(phi); internal ones solve
    H1(phi) + H2(phi + pi) = 0. Roots are bracketed on a uniform angle grid
    and refined by bisection.
    """
    grid = np.linspace(-math.pi, math.pi, ROOT_SAMPLES + 1)

    def external(phi):
        return _support_value(body1, phi) - _support_value(body2, phi)

    def internal(phi):
        return _support_value(body1, phi) + _support_value(body2, phi + math.pi)

    lines = []
    for func in (external, internal):
        values = func(grid)
        for i in range(ROOT_SAMPLES):
            f0, f1 = values[i], values[i + 1]
            if f0 == 0.0:
                root = float(grid[i])
            elif f0 * f1 < 0:
                root = bisect(lambda x: float(func(x)), grid[i], grid[i + 1], xtol=1e-15, maxiter=200)
            else:
                continue
            lines.append((root, float(_support_value(body1, root))))
    return lines


def _point_tangent_lines(point: np.ndarray, body: Any, eps: float) -> list[tuple[float, float]]:
    """Lines through `point` tangent to a circle or ellipse."""
    if isinstance(body, Ellipse):
        a, b = body.axes
        cos_a, sin_a = math.cos(body.angle), math.sin(body.angle)
        # Local map y = M (x - c) sends the ellipse to the unit circle
        m = np.array([[cos_a / a, sin_a / a], [-sin_a / b, cos_a / b]])
        c = np.asarray(body.center, dtype=float)
        local = m @ (point - c)
        out = []
        for phi_l, s_l in _point_tangent_lines(local, Disk(center=(0.0, 0.0), radius=1.0), eps / max(a, b)):
            n = m.T @ _unit(phi_l)
            norm = math.hypot(n[0], n[1])
            out.append((math.atan2(n[1], n[0]), (s_l + n @ c) / norm))
        return out

    c = np.asarray(body.center, dtype=float)
    d = point - c
    dist = math.hypot(d[0], d[1])
    gamma = math.atan2(d[1], d[0])
    if abs(dist - body.radius) <= eps:
        return [(gamma, float(_unit(gamma) @ point))]
    if dist < body.radius:
        return []
    beta = math.acos(body.radius / dist)
    return [(phi, float(_unit(phi) @ point)) for phi in (gamma + beta, gamma - beta)]


def _raw_candidates(prims: list[Any], fov: float) -> list[tuple[float, float]]:
    """Over-generate lines from every pair of boundary features."""
    lines: list[tuple[float, float]] = []

    for prim in prims:
        for p0, _, n in _edges(prim):
            lines.append((math.atan2(n[1], n[0]), float(n @ p0)))

    smooth = [p for p in prims if isinstance(p, (Disk, Ellipse, Sector))]
    for b1, b2 in combinations(smooth, 2):
        if isinstance(b1, Ellipse) or isinstance(b2, Ellipse):
            lines.extend(_support_pair_lines(b1, b2))
        else:
            lines.extend(_circle_pair_lines(
                np.asarray(b1.center, dtype=float), b1.radius,
                np.asarray(b2.center, dtype=float), b2.radius
            ))

    vertices = [v for prim in prims for v, _, _ in _corners(prim)]
    for p, q in combinations(vertices, 2):
        d = q - p
        length = math.hypot(d[0], d[1])
        if length <= TANGENCY_TOL * fov:
            continue
        n = np.array([d[1], -d[0]]) / length
        lines.append((math.atan2(n[1], n[0]), float(n @ p)))

    for v in vertices:
        for body in smooth:
            lines.extend(_point_tangent_lines(v, body, TANGENCY_TOL * fov))

    return lines


def enumerate_streak_candidates(
    metals: Sequence[MetalRegion | Sequence[Any]],
    fov: float = 1.0,
    source: LineSource = 'geometry'
) -> list[StreakLine]:
    """Enumerate every line touching the metal boundary at >= 2 distinct points.

    Candidate lines are generated from edge supporting lines, common tangents
    of every pair of smooth primitives (closed form for circles, bracketed
    bisection for ellipses), vertex-vertex lines and vertex-to-conic
    tangents. Each candidate is validated with `line_tangencies` against
    every region; lines are kept when the combined unflagged events cover
    two distinct t values. Regions are independent subdomains: the union
    rule applies within a region only.

    Args:
        metals: Regions whose boundaries are analysed; a plain list of
            primitives is accepted as a region (used for non-metal subdomains)
        fov: Field-of-view half-width used to scale tolerances
        source: Source tag stored on the returned lines

    Returns:
        list[StreakLine]: Deduplicated lines with canonical (phi, s) labels,
            sorted by (phi, s).

    Raises:
        GeometryError: If `metals` is empty

    Logs:
        WARNING: Bitangents discarded because they cross a region interior
        WARNING: Candidates with ambiguous tangencies

    Example:
        >>> lines = enumerate_streak_candidates(two_disk_phantom.metals)
        >>> len(lines)
        4
    """
    if not metals:
        raise GeometryError(message="At least one metal region is required", constraint="nonempty")

    start_time = time.time()
    groups = [_primitives_of(region) for region in metals]
    prims = [p for group in groups for p in group]
    raw = _raw_candidates(prims, fov)

    accepted: list[StreakLine] = []
    filtered: list[tuple[float, float]] = []
    ambiguous = 0
    for phi, s in raw:
        phi, s = canonical_line(phi, s)
        if any(same_line((phi, s), (line.phi, line.s), fov) for line in accepted):
            continue
        kept: list[TangencyEvent] = []
        dropped: list[TangencyEvent] = []
        for group in groups:
            k, d = _region_events(group, phi, s, fov)
            kept.extend(k)
            dropped.extend(d)
        if distinct_t_count(kept, fov) >= 2:
            if any(e.flagged for e in kept):
                ambiguous += 1
            accepted.append(StreakLine(phi=phi, s=s, tangencies=kept, span_dim=2, source=source))
        elif distinct_t_count(kept + dropped, fov) >= 2:
            if not any(same_line((phi, s), f, fov) for f in filtered):
                filtered.append((phi, s))

    if filtered:
        logger.warning(
            "Candidate lines crossing a region interior were filtered out",
            filtered=len(filtered),
            regions=len(metals)
        )
    if ambiguous:
        logger.warning("Candidate lines with ambiguous tangencies", lines=ambiguous)

    accepted.sort(key=lambda line: (line.phi, line.s))
    logger.debug(
        "Streak candidates enumerated",
        raw=len(raw),
        accepted=len(accepted),
        duration_ms=round((time.time() - start_time) * 1000, 2)
    )
    return accepted
