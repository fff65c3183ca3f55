"""Static world geometry: buildings, LOS tests, and beam-extension regions.

All coordinates are in meters on the ground plane. Blockage is purely 2-D;
antenna heights only enter the path-loss distance elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometryError

# Angular width clamp for beam regions; a convex quadrilateral cannot
# represent a sector of half-plane width or more.
_MAX_SECTOR_WIDTH = math.pi - 1e-9


@dataclass(frozen=True)
class Location:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def dist(self, other: "Location") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class BaseStationSite:
    id: int
    location: Location
    antenna_height: float

    def __post_init__(self):
        if self.antenna_height <= 0:
            raise InvalidGeometryError(f"BS {self.id}: antenna height must be > 0")


@dataclass
class BuildingMap:
    """Axis-aligned rectangular blockages, stored as an (R, 4) array
    of [x_min, y_min, x_max, y_max] rows."""

    rects: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    def __post_init__(self):
        self.rects = np.asarray(self.rects, dtype=float).reshape(-1, 4)
        if self.rects.size and not (
            np.all(self.rects[:, 2] > self.rects[:, 0])
            and np.all(self.rects[:, 3] > self.rects[:, 1])
        ):
            raise InvalidGeometryError("degenerate building rectangle (non-positive area)")

    def __len__(self) -> int:
        return len(self.rects)


def segments_blocked(a: np.ndarray, b: np.ndarray, rects: np.ndarray) -> np.ndarray:
    """Vectorized interior-intersection test for M segments against R rectangles.

    a, b: (M, 2) segment endpoints; rects: (R, 4). Returns a (M,) bool mask,
    True where the segment crosses the interior of at least one rectangle.
    Touching a boundary only does not block.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    m = a.shape[0]
    if rects.size == 0:
        return np.zeros(m, dtype=bool)
    d = b - a  # (M, 2)
    lo = rects[:, :2]  # (R, 2)
    hi = rects[:, 2:]  # (R, 2)

    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo[None, :, :] - a[:, None, :]) / d[:, None, :]  # (M, R, 2)
        t2 = (hi[None, :, :] - a[:, None, :]) / d[:, None, :]
    tmin_axis = np.minimum(t1, t2)
    tmax_axis = np.maximum(t1, t2)

    # Axes where the segment is parallel to the slab: unconstrained in t, but
    # the coordinate must be strictly inside for an interior crossing.
    par = np.abs(d)[:, None, :] < 1e-300  # (M, 1->R broadcast, 2)
    inside_par = (a[:, None, :] > lo[None, :, :]) & (a[:, None, :] < hi[None, :, :])
    tmin_axis = np.where(par, -np.inf, tmin_axis)
    tmax_axis = np.where(par, np.inf, tmax_axis)
    par_ok = np.all(~par | inside_par, axis=2)  # (M, R)

    tlo = np.maximum(tmin_axis.max(axis=2), 0.0)
    thi = np.minimum(tmax_axis.min(axis=2), 1.0)

    # Positive-length chord through the closed box, with parallel axes strictly
    # inside, means the open interior is crossed. A degenerate segment reduces
    # to a strict point-in-rect test via the parallel-axis branch.
    crosses = par_ok & (thi > tlo)
    degenerate = np.all(np.abs(d) < 1e-300, axis=1)  # (M,)
    if degenerate.any():
        pt_inside = np.all(
            (a[:, None, :] > lo[None, :, :]) & (a[:, None, :] < hi[None, :, :]), axis=2
        )
        crosses = np.where(degenerate[:, None], pt_inside, crosses)
    return crosses.any(axis=1)


def los_blocked(a: Location, b: Location, building_map: BuildingMap) -> bool:
    """True iff the open segment a-b passes through any building interior."""
    return bool(
        segments_blocked(
            np.array([[a.x, a.y]]), np.array([[b.x, b.y]]), building_map.rects
        )[0]
    )


@dataclass
class ConvexPolygon:
    """Counter-clockwise convex polygon with at least three vertices."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise InvalidGeometryError("polygon needs at least 3 vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross < -1e-9 * np.max(np.abs(v) + 1.0) ** 2):
            raise InvalidGeometryError("polygon not convex counter-clockwise")
        self.vertices = v

    def edge_normals(self) -> np.ndarray:
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        n = np.stack([-e[:, 1], e[:, 0]], axis=1)
        lens = np.linalg.norm(n, axis=1)
        return n / np.maximum(lens, 1e-300)[:, None]

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        w = np.array([x, y]) - v
        cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
        scale = np.max(np.abs(v)) + 1.0
        return bool(np.all(cross >= -tol * scale))

    def bbox(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()


def _wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def beam_region(
    l_start: Location,
    l_bs: Location,
    l_end: Location,
    theta_beam: float,
    d_max: float,
) -> ConvexPolygon:
    """Convex quadrilateral covering the outward extension of the beam that
    swept from l_start to l_end as seen from l_bs.

    Angular extent: the interval spanned by the two endpoint directions,
    symmetrically widened to at least theta_beam. Radial extent: from the
    farther endpoint distance out to d_max, with arcs replaced by chords.
    """
    d_s = l_start.dist(l_bs)
    d_e = l_end.dist(l_bs)
    if d_s == 0.0 or d_e == 0.0:
        raise InvalidGeometryError("beam endpoints must differ from the BS site")
    if not (0.0 < theta_beam < math.pi / 2):
        raise InvalidGeometryError("theta_beam must lie in (0, pi/2)")
    r_min = max(d_s, d_e)
    if d_max <= r_min:
        raise InvalidGeometryError(
            f"d_max ({d_max:.3f} m) must exceed both endpoint distances ({r_min:.3f} m)"
        )

    a1 = math.atan2(l_start.y - l_bs.y, l_start.x - l_bs.x)
    a2 = math.atan2(l_end.y - l_bs.y, l_end.x - l_bs.x)
    span = _wrap_angle(a2 - a1)
    center = a1 + span / 2.0
    width = min(max(abs(span), theta_beam), _MAX_SECTOR_WIDTH)
    lo = center - width / 2.0
    hi = center + width / 2.0

    def polar(r: float, ang: float) -> list[float]:
        return [l_bs.x + r * math.cos(ang), l_bs.y + r * math.sin(ang)]

    verts = np.array(
        [polar(r_min, lo), polar(d_max, lo), polar(d_max, hi), polar(r_min, hi)]
    )
    return ConvexPolygon(verts)


def _project_extents(points: np.ndarray, axes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    proj = points @ axes.T
    return proj.min(axis=0), proj.max(axis=0)


def polygon_intersects_rect(poly: ConvexPolygon, rect: np.ndarray) -> bool:
    """Separating-axis intersection test, closed-set convention (touching
    counts). rect is [x_min, y_min, x_max, y_max]."""
    x0, y0, x1, y1 = map(float, rect)
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    axes = np.vstack([np.array([[1.0, 0.0], [0.0, 1.0]]), poly.edge_normals()])
    pmin, pmax = _project_extents(poly.vertices, axes)
    rmin, rmax = _project_extents(corners, axes)
    separated = (pmax < rmin) | (rmax < pmin)
    return not bool(separated.any())


def polygon_intersects_cells(
    poly: ConvexPolygon, cell_corners: np.ndarray
) -> np.ndarray:
    """Batched SAT: the polygon against C axis-aligned cells.

    cell_corners: (C, 4, 2) corner coordinates per cell. Returns (C,) bool.
    """
    axes = np.vstack([np.array([[1.0, 0.0], [0.0, 1.0]]), poly.edge_normals()])  # (A, 2)
    pmin, pmax = _project_extents(poly.vertices, axes)  # (A,)
    proj = cell_corners @ axes.T  # (C, 4, A)
    cmin = proj.min(axis=1)
    cmax = proj.max(axis=1)
    separated = (pmax[None, :] < cmin) | (cmax < pmin[None, :])
    return ~separated.any(axis=1)
