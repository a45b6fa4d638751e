"""Phantom Models

Defines the Pydantic models for analytic phantoms: attenuation primitives
(disks, ellipses, convex polygons, disk sectors), metal regions carrying a
per-primitive spectral slope, and the phantom itself. Every primitive knows
its exact membership test, a signed interior margin, its bounding box and
the exact chord length cut from it by any line, which is all the Radon and
geometry modules need.

Lines are parameterised as L(phi, s) = {x : x . theta = s} with
theta = (cos phi, sin phi); points on the line are s theta + t theta_perp
with theta_perp = (-sin phi, cos phi).

Public Classes:
    Disk, Ellipse, Polygon, Sector: Primitive kinds
    MetalRegion: Metal subdomains with spectral slopes
    Phantom: Background primitives plus metal regions
    ContrastCheck: Result of the metal/background contrast check

Public Functions:
    attenuation_at: Attenuation at a point for a given energy
    check_metal_contrast: Compare metal and non-metal attenuation levels
"""

import math
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import GeometryError
from .logger import get_logger

logger = get_logger(__name__)


# Closed-set membership tolerance (absolute, in length units)
CONTAINS_TOL = 1e-12
# Slack used when deciding whether a half-plane constraint is degenerate
_PARALLEL_TOL = 1e-14

Point = tuple[float, float]


def _as_points(points: Any) -> np.ndarray:
    """Coerce a point or an array of points to a float array of shape (..., 2)."""
    arr = np.asarray(points, dtype=float)
    if arr.shape[-1] != 2:
        raise GeometryError(
            message=f"Points must have a trailing dimension of 2, got shape {arr.shape}",
            constraint="point_shape"
        )
    return arr


def _clip_halfplane(
    t_lo: np.ndarray,
    t_hi: np.ndarray,
    a: np.ndarray,
    rhs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Intersect the t-interval [t_lo, t_hi] with {t : a t <= rhs}.

    All arrays broadcast together. Where a is zero the constraint is either
    always satisfied (rhs >= 0) or never (rhs < 0).
    """
    a, rhs = np.broadcast_arrays(a, rhs)
    pos = a > _PARALLEL_TOL
    neg = a < -_PARALLEL_TOL
    flat = ~(pos | neg)
    safe_a = np.where(flat, 1.0, a)
    bound = rhs / safe_a
    t_hi = np.where(pos, np.minimum(t_hi, bound), t_hi)
    t_lo = np.where(neg, np.maximum(t_lo, bound), t_lo)
    t_hi = np.where(flat & (rhs < 0), -np.inf, t_hi)
    return t_lo, t_hi


class _PrimitiveBase(BaseModel):
    """Fields shared by every primitive kind."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    value: float = 0.0
    hull: bool = False

    def contains(self, points: Any) -> np.ndarray | bool:
        """Closed-set membership; boundary points count as inside."""
        margin = self.margin(points)
        inside = margin >= -CONTAINS_TOL
        return bool(inside) if np.ndim(inside) == 0 else inside

    def margin(self, points: Any) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def support_radius(self) -> float:
        raise NotImplementedError

    def chord(self, cos_phi: np.ndarray, sin_phi: np.ndarray, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Disk(_PrimitiveBase):
    """Disk of given center and radius."""

    kind: Literal['disk'] = 'disk'
    center: Point
    radius: float

    @model_validator(mode='after')
    def validate_radius(self) -> 'Disk':
        if not self.radius > 0:
            raise GeometryError(
                message=f"Disk radius must be > 0, got {self.radius}",
                primitive="disk",
                constraint="radius"
            )
        return self

    def margin(self, points: Any) -> np.ndarray:
        p = _as_points(points)
        return self.radius - np.hypot(p[..., 0] - self.center[0], p[..., 1] - self.center[1])

    def bounding_box(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        r = self.radius
        return cx - r, cx + r, cy - r, cy + r

    def support_radius(self) -> float:
        return math.hypot(*self.center) + self.radius

    def chord(self, cos_phi: np.ndarray, sin_phi: np.ndarray, s: np.ndarray) -> np.ndarray:
        d = s - (self.center[0] * cos_phi + self.center[1] * sin_phi)
        return 2.0 * np.sqrt(np.clip(self.radius ** 2 - d ** 2, 0.0, None))


class Ellipse(_PrimitiveBase):
    """Ellipse with semi-axes (a, b) rotated by `angle` radians."""

    kind: Literal['ellipse'] = 'ellipse'
    center: Point
    axes: tuple[float, float]
    angle: float = 0.0

    @model_validator(mode='after')
    def validate_axes(self) -> 'Ellipse':
        if not (self.axes[0] > 0 and self.axes[1] > 0):
            raise GeometryError(
                message=f"Ellipse semi-axes must be > 0, got {self.axes}",
                primitive="ellipse",
                constraint="axes"
            )
        return self

    def to_local(self, points: Any) -> np.ndarray:
        """Map points into the ellipse frame (axis-aligned, centered)."""
        p = _as_points(points)
        dx = p[..., 0] - self.center[0]
        dy = p[..., 1] - self.center[1]
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)

    def support(self, cos_phi: np.ndarray, sin_phi: np.ndarray) -> np.ndarray:
        """Support half-width h(theta) = max over the centered ellipse of x . theta."""
        a, b = self.axes
        rel_cos = cos_phi * math.cos(self.angle) + sin_phi * math.sin(self.angle)
        rel_sin = sin_phi * math.cos(self.angle) - cos_phi * math.sin(self.angle)
        return np.sqrt((a * rel_cos) ** 2 + (b * rel_sin) ** 2)

    def margin(self, points: Any) -> np.ndarray:
        local = self.to_local(points)
        a, b = self.axes
        rho = np.hypot(local[..., 0] / a, local[..., 1] / b)
        return (1.0 - rho) * min(a, b)

    def bounding_box(self) -> tuple[float, float, float, float]:
        a, b = self.axes
        c, s = math.cos(self.angle), math.sin(self.angle)
        hx = math.sqrt((a * c) ** 2 + (b * s) ** 2)
        hy = math.sqrt((a * s) ** 2 + (b * c) ** 2)
        cx, cy = self.center
        return cx - hx, cx + hx, cy - hy, cy + hy

    def support_radius(self) -> float:
        return math.hypot(*self.center) + max(self.axes)

    def chord(self, cos_phi: np.ndarray, sin_phi: np.ndarray, s: np.ndarray) -> np.ndarray:
        a, b = self.axes
        h = self.support(cos_phi, sin_phi)
        d = s - (self.center[0] * cos_phi + self.center[1] * sin_phi)
        return 2.0 * a * b * np.sqrt(np.clip(h ** 2 - d ** 2, 0.0, None)) / h ** 2


class Polygon(_PrimitiveBase):
    """Convex polygon with counterclockwise vertices."""

    kind: Literal['polygon'] = 'polygon'
    vertices: tuple[Point, ...]

    @model_validator(mode='after')
    def validate_convex_ccw(self) -> 'Polygon':
        v = np.asarray(self.vertices, dtype=float)
        if len(v) < 3:
            raise GeometryError(
                message=f"Polygon needs at least 3 vertices, got {len(v)}",
                primitive="polygon",
                constraint="vertex_count"
            )
        edges = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(edges[:, 0], edges[:, 1]) <= 0):
            raise GeometryError(
                message="Polygon has repeated consecutive vertices",
                primitive="polygon",
                constraint="simple"
            )
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross <= 0):
            raise GeometryError(
                message="Polygon vertices must be strictly convex and counterclockwise",
                primitive="polygon",
                constraint="convex_ccw"
            )
        turning = np.sum(np.arctan2(cross, np.sum(edges * nxt, axis=1)))
        if abs(turning - 2.0 * math.pi) > 1e-6:
            raise GeometryError(
                message="Polygon boundary must wind exactly once (simple polygon)",
                primitive="polygon",
                constraint="simple"
            )
        return self

    def edges(self) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Edges as (start, end, outward unit normal)."""
        v = np.asarray(self.vertices, dtype=float)
        out = []
        for i in range(len(v)):
            p0, p1 = v[i], v[(i + 1) % len(v)]
            d = p1 - p0
            n = np.array([d[1], -d[0]]) / math.hypot(d[0], d[1])
            out.append((p0, p1, n))
        return out

    def margin(self, points: Any) -> np.ndarray:
        p = _as_points(points)
        result = np.full(p.shape[:-1], np.inf)
        for p0, _, n in self.edges():
            result = np.minimum(result, n @ p0 - (p[..., 0] * n[0] + p[..., 1] * n[1]))
        return result

    def bounding_box(self) -> tuple[float, float, float, float]:
        v = np.asarray(self.vertices, dtype=float)
        return float(v[:, 0].min()), float(v[:, 0].max()), float(v[:, 1].min()), float(v[:, 1].max())

    def support_radius(self) -> float:
        return max(math.hypot(x, y) for x, y in self.vertices)

    def chord(self, cos_phi: np.ndarray, sin_phi: np.ndarray, s: np.ndarray) -> np.ndarray:
        shape = np.broadcast_shapes(np.shape(cos_phi), np.shape(s))
        t_lo = np.full(shape, -np.inf)
        t_hi = np.full(shape, np.inf)
        for p0, _, n in self.edges():
            a = -n[0] * sin_phi + n[1] * cos_phi
            rhs = n @ p0 - s * (n[0] * cos_phi + n[1] * sin_phi)
            t_lo, t_hi = _clip_halfplane(t_lo, t_hi, a, rhs)
        return np.clip(t_hi - t_lo, 0.0, None)


class Sector(_PrimitiveBase):
    """Disk sector spanning angles [start, end] counterclockwise from the center.

    The boundary is one arc plus two straight edges meeting at the center.
    Extents above pi give a non-convex (reflex) corner at the center.
    """

    kind: Literal['sector'] = 'sector'
    center: Point
    radius: float
    start: float
    end: float

    @model_validator(mode='after')
    def validate_extent(self) -> 'Sector':
        if not self.radius > 0:
            raise GeometryError(
                message=f"Sector radius must be > 0, got {self.radius}",
                primitive="sector",
                constraint="radius"
            )
        extent = self.end - self.start
        if not 0.0 < extent < 2.0 * math.pi:
            raise GeometryError(
                message=f"Sector angular extent must lie in (0, 2pi), got {extent}",
                primitive="sector",
                constraint="extent"
            )
        return self

    @property
    def extent(self) -> float:
        return self.end - self.start

    def corner_points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Center, start-of-arc point and end-of-arc point."""
        c = np.asarray(self.center, dtype=float)
        a = c + self.radius * np.array([math.cos(self.start), math.sin(self.start)])
        b = c + self.radius * np.array([math.cos(self.end), math.sin(self.end)])
        return c, a, b

    def edge_normals(self) -> tuple[np.ndarray, np.ndarray]:
        """Outward normals of the center->start edge and the end->center edge."""
        n1 = np.array([math.sin(self.start), -math.cos(self.start)])
        n2 = np.array([-math.sin(self.end), math.cos(self.end)])
        return n1, n2

    def in_arc_range(self, angle: float, tol: float = 0.0) -> bool:
        """Whether a polar angle about the center lies within [start - tol, end + tol]."""
        rel = (angle - self.start) % (2.0 * math.pi)
        if rel > 2.0 * math.pi - tol:
            rel -= 2.0 * math.pi
        return -tol <= rel <= self.extent + tol

    def margin(self, points: Any) -> np.ndarray:
        p = _as_points(points)
        dx = p[..., 0] - self.center[0]
        dy = p[..., 1] - self.center[1]
        n1, n2 = self.edge_normals()
        h1 = -(n1[0] * dx + n1[1] * dy)
        h2 = -(n2[0] * dx + n2[1] * dy)
        wedge = np.minimum(h1, h2) if self.extent <= math.pi else np.maximum(h1, h2)
        return np.minimum(self.radius - np.hypot(dx, dy), wedge)

    def bounding_box(self) -> tuple[float, float, float, float]:
        c, a, b = self.corner_points()
        pts = [c, a, b]
        for k in range(4):
            ang = k * math.pi / 2.0
            if self.in_arc_range(ang):
                pts.append(c + self.radius * np.array([math.cos(ang), math.sin(ang)]))
        arr = np.asarray(pts)
        return float(arr[:, 0].min()), float(arr[:, 0].max()), float(arr[:, 1].min()), float(arr[:, 1].max())

    def support_radius(self) -> float:
        return math.hypot(*self.center) + self.radius

    def _disk_interval(
        self,
        cos_phi: np.ndarray,
        sin_phi: np.ndarray,
        s: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        cx, cy = self.center
        d = s - (cx * cos_phi + cy * sin_phi)
        tc = -cx * sin_phi + cy * cos_phi
        w2 = self.radius ** 2 - d ** 2
        w = np.sqrt(np.clip(w2, 0.0, None))
        t_lo = np.where(w2 > 0, tc - w, np.inf)
        t_hi = np.where(w2 > 0, tc + w, -np.inf)
        return t_lo, t_hi

    def _clip_edge(
        self,
        t_lo: np.ndarray,
        t_hi: np.ndarray,
        n: np.ndarray,
        cos_phi: np.ndarray,
        sin_phi: np.ndarray,
        s: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        a = -n[0] * sin_phi + n[1] * cos_phi
        rhs = n @ c - s * (n[0] * cos_phi + n[1] * sin_phi)
        return _clip_halfplane(t_lo, t_hi, a, rhs)

    def chord(self, cos_phi: np.ndarray, sin_phi: np.ndarray, s: np.ndarray) -> np.ndarray:
        n1, n2 = self.edge_normals()
        lo, hi = self._disk_interval(cos_phi, sin_phi, s)
        lo1, hi1 = self._clip_edge(lo, hi, n1, cos_phi, sin_phi, s)
        lo12, hi12 = self._clip_edge(lo1, hi1, n2, cos_phi, sin_phi, s)
        both = np.clip(hi12 - lo12, 0.0, None)
        if self.extent <= math.pi:
            return both
        # Reflex sector: disk cut by the union of the two half-planes
        lo2, hi2 = self._clip_edge(lo, hi, n2, cos_phi, sin_phi, s)
        return np.clip(hi1 - lo1, 0.0, None) + np.clip(hi2 - lo2, 0.0, None) - both


Primitive = Annotated[Union[Disk, Ellipse, Polygon, Sector], Field(discriminator='kind')]


class MetalRegion(BaseModel):
    """Metal subdomains D_j with their spectral slopes alpha_j.

    The union of the primitives is the metal region; `alpha[j]` is the
    attenuation change per unit energy inside `primitives[j]` and must be
    negative. In files the slope may be given as an `alpha` key on each
    primitive entry instead of a separate list.
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    label: str = "metal"
    primitives: list[Primitive]
    alpha: list[float]

    @model_validator(mode='before')
    @classmethod
    def collect_inline_alpha(cls, data: Any) -> Any:
        """Pull `alpha` keys off primitive entries into the alpha list."""
        if not isinstance(data, dict) or 'alpha' in data:
            return data
        prims = data.get('primitives')
        if not isinstance(prims, list):
            return data
        alphas, cleaned = [], []
        for entry in prims:
            if isinstance(entry, dict):
                entry = dict(entry)
                if 'alpha' not in entry:
                    raise GeometryError(
                        message=f"Metal primitive in region '{data.get('label', 'metal')}' is missing 'alpha'",
                        primitive=str(entry.get('kind')),
                        constraint="alpha"
                    )
                alphas.append(entry.pop('alpha'))
            cleaned.append(entry)
        return {**data, 'primitives': cleaned, 'alpha': alphas}

    @model_validator(mode='after')
    def validate_alpha(self) -> 'MetalRegion':
        if not self.primitives:
            raise GeometryError(
                message=f"Metal region '{self.label}' has no primitives",
                constraint="nonempty"
            )
        if len(self.alpha) != len(self.primitives):
            raise GeometryError(
                message=f"Metal region '{self.label}' needs one alpha per primitive "
                        f"({len(self.primitives)} primitives, {len(self.alpha)} alphas)",
                constraint="alpha_count"
            )
        if any(not a < 0 for a in self.alpha):
            raise GeometryError(
                message=f"Metal region '{self.label}' has non-negative alpha {self.alpha}; "
                        "metal attenuation must decrease with energy",
                constraint="alpha_negative"
            )
        return self

    def contains(self, points: Any) -> np.ndarray | bool:
        """Membership in the union of the region's primitives."""
        inside = np.logical_or.reduce([np.asarray(p.contains(points)) for p in self.primitives])
        return bool(inside) if np.ndim(inside) == 0 else inside

    def chi(self, points: Any) -> np.ndarray:
        """Indicator of the union as floats."""
        return np.asarray(self.contains(points), dtype=float)


class Phantom(BaseModel):
    """Analytic phantom: f_E0 from background and metal primitive values,
    plus metal regions whose attenuation varies linearly with energy.

    Args:
        name: Free-form label
        fov: Half-width of the square field of view
        background: Non-metal primitives; at most one may be flagged `hull`
            (the convex body D_0 used for the scatter support)
        metals: Metal regions
        piecewise_constant: Declares f_E0 a sum of constant subdomains,
            required for the scatter model
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    name: str = "phantom"
    fov: float = 1.0
    background: list[Primitive] = Field(default_factory=list)
    metals: list[MetalRegion] = Field(default_factory=list)
    piecewise_constant: bool = True

    @model_validator(mode='after')
    def validate_layout(self) -> 'Phantom':
        if not self.fov > 0:
            raise GeometryError(message=f"fov must be > 0, got {self.fov}", constraint="fov")
        slack = 1e-9 * self.fov
        for prim in self.all_primitives():
            x0, x1, y0, y1 = prim.bounding_box()
            if min(x0, y0) < -self.fov - slack or max(x1, y1) > self.fov + slack:
                raise GeometryError(
                    message=f"{prim.kind} with bounding box {(x0, x1, y0, y1)} lies outside "
                            f"the field of view [-{self.fov}, {self.fov}]^2",
                    primitive=prim.kind,
                    constraint="inside_fov"
                )
        if sum(1 for p in self.background if p.hull) > 1:
            raise GeometryError(message="At most one background primitive may be flagged hull", constraint="hull")
        if any(p.hull for m in self.metals for p in m.primitives):
            raise GeometryError(message="Metal primitives cannot be the hull", constraint="hull")
        return self

    def all_primitives(self) -> list[Any]:
        return list(self.background) + [p for m in self.metals for p in m.primitives]

    def metal_primitives(self) -> list[tuple[Any, float]]:
        """(primitive, alpha_j) pairs over all metal regions."""
        return [(p, a) for m in self.metals for p, a in zip(m.primitives, m.alpha)]

    @property
    def hull(self) -> Any | None:
        return next((p for p in self.background if p.hull), None)

    def shared_alpha(self) -> float:
        """The common metal slope when all metal primitives share one.

        Raises:
            GeometryError: If there are no metals or the slopes differ.
        """
        alphas = [a for _, a in self.metal_primitives()]
        if not alphas:
            raise GeometryError(message="Phantom has no metal regions", constraint="metal")
        if max(alphas) - min(alphas) > 1e-12 * max(abs(a) for a in alphas):
            raise GeometryError(
                message=f"Metal slopes differ ({sorted(set(alphas))}); use the binned spectrum path",
                constraint="shared_alpha"
            )
        return alphas[0]

    def alpha_delta(self, delta: float) -> float:
        """The product alpha * delta driving the beam-hardening trace."""
        return self.shared_alpha() * delta

    def f_e0(self, points: Any) -> np.ndarray:
        """Attenuation at the reference energy: sum of all primitive values."""
        p = _as_points(points)
        out = np.zeros(p.shape[:-1])
        for prim in self.all_primitives():
            out = out + prim.value * np.asarray(prim.contains(p), dtype=float)
        return out

    def chi_metal(self, points: Any) -> np.ndarray:
        """Indicator of the union of all metal regions."""
        p = _as_points(points)
        out = np.zeros(p.shape[:-1], dtype=bool)
        for region in self.metals:
            out |= np.asarray(region.contains(p), dtype=bool)
        return out.astype(float)


def attenuation_at(phantom: Phantom, point: Any, energy: float, e0: float) -> np.ndarray | float:
    """Attenuation f_E(x) = f_E0(x) + sum_j alpha_j (E - E0) chi_{D_j}(x).

    Args:
        phantom: Phantom to evaluate
        point: A point (x, y) or an array of points with trailing dimension 2
        energy: Photon energy E
        e0: Reference energy E0 at which primitive values are given

    Returns:
        Attenuation value(s); a float for a single point.

    Example:
        >>> attenuation_at(phantom, (0.0, 0.0), energy=0.16, e0=0.06)
    """
    p = _as_points(point)
    out = phantom.f_e0(p)
    for prim, alpha in phantom.metal_primitives():
        out = out + alpha * (energy - e0) * np.asarray(prim.contains(p), dtype=float)
    return float(out) if np.ndim(out) == 0 else out


class ContrastCheck(BaseModel):
    """Outcome of comparing f_E0 on the metal against its values elsewhere."""

    model_config = ConfigDict(frozen=True)

    metal_min: float
    outside_max: float
    ratio: float
    required: float
    satisfied: bool


def check_metal_contrast(phantom: Phantom, required: float = 1.0, n: int = 256) -> ContrastCheck:
    """Check that f_E0 on the metal dominates f_E0 outside it.

    Samples f_E0 on an n x n pixel-center grid and reports
    C = min(f_E0 on metal) / max(f_E0 off metal). A ratio at or below
    `required` is logged as a warning; it is never an error.

    Args:
        phantom: Phantom with at least one metal region
        required: The constant C the ratio must exceed
        n: Sampling grid size per side
    """
    pitch = 2.0 * phantom.fov / n
    coords = -phantom.fov + (np.arange(n) + 0.5) * pitch
    xx, yy = np.meshgrid(coords, coords)
    pts = np.stack([xx, yy], axis=-1)
    values = phantom.f_e0(pts)
    metal = phantom.chi_metal(pts) > 0
    if not metal.any():
        raise GeometryError(message="Phantom has no metal pixels at this sampling", constraint="metal")
    metal_min = float(values[metal].min())
    outside = values[~metal]
    outside_max = float(outside.max()) if outside.size else 0.0
    ratio = math.inf if outside_max <= 0 else metal_min / outside_max
    result = ContrastCheck(
        metal_min=metal_min,
        outside_max=outside_max,
        ratio=ratio,
        required=required,
        satisfied=ratio > required
    )
    if not result.satisfied:
        logger.warning(
            "Metal attenuation does not dominate the background",
            phantom=phantom.name,
            ratio=round(ratio, 6),
            required=required
        )
    return result
