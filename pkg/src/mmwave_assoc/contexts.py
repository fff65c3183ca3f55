"""Uniform partition of the (velocity, x, y) context space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBoundsError
from .geometry import ConvexPolygon, polygon_intersects_cells


@dataclass(frozen=True)
class ContextId:
    iv: int
    ix: int
    iy: int


@dataclass(frozen=True)
class ContextGrid:
    n_v: int
    n_x: int
    n_y: int
    v_min: float
    v_max: float
    world_w: float
    world_h: float

    def __post_init__(self):
        if min(self.n_v, self.n_x, self.n_y) < 1:
            raise ValueError("all cell counts must be >= 1")
        if not (self.v_max > self.v_min and self.world_w > 0 and self.world_h > 0):
            raise ValueError("invalid grid ranges")

    @property
    def n_contexts(self) -> int:
        return self.n_v * self.n_x * self.n_y

    @property
    def n_spatial(self) -> int:
        return self.n_x * self.n_y

    @property
    def cell_w(self) -> float:
        return self.world_w / self.n_x

    @property
    def cell_h(self) -> float:
        return self.world_h / self.n_y

    def velocity_bin(self, v: float) -> int:
        """Bin index for a velocity, clamped into [v_min, v_max]. Bins are
        half-open [lo, hi) except the top one, which is closed."""
        v = min(max(v, self.v_min), self.v_max)
        i = int((v - self.v_min) / (self.v_max - self.v_min) * self.n_v)
        return min(i, self.n_v - 1)

    def spatial_bin(self, x: float, y: float) -> tuple[int, int]:
        if not (0.0 <= x <= self.world_w and 0.0 <= y <= self.world_h):
            raise OutOfBoundsError(f"location ({x}, {y}) outside world")
        ix = min(int(x / self.cell_w), self.n_x - 1)
        iy = min(int(y / self.cell_h), self.n_y - 1)
        return ix, iy

    def flat(self, ctx: ContextId) -> int:
        return (ctx.iv * self.n_x + ctx.ix) * self.n_y + ctx.iy

    def unflat(self, f: int) -> ContextId:
        iv, rem = divmod(f, self.n_x * self.n_y)
        ix, iy = divmod(rem, self.n_y)
        return ContextId(iv, ix, iy)

    def flat_spatial(self, ix: int, iy: int) -> int:
        return ix * self.n_y + iy

    def spatial_cell_rect(self, ix: int, iy: int) -> np.ndarray:
        return np.array(
            [ix * self.cell_w, iy * self.cell_h, (ix + 1) * self.cell_w, (iy + 1) * self.cell_h]
        )

    def spatial_cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.cell_w, (iy + 0.5) * self.cell_h


def context_of(d: tuple[float, float, float], grid: ContextGrid) -> ContextId:
    """Map a (velocity, x, y) observation to its grid cell. Velocity is
    clamped to its range; a location outside the world raises."""
    v, x, y = d
    iv = grid.velocity_bin(v)
    ix, iy = grid.spatial_bin(x, y)
    return ContextId(iv, ix, iy)


def spatial_cells_in_polygon(poly: ConvexPolygon, grid: ContextGrid) -> np.ndarray:
    """Flat spatial indices of all grid cells whose rectangle intersects the
    polygon (closed-set test). Restricted to the polygon's bounding box."""
    x0, y0, x1, y1 = poly.bbox()
    if x1 < 0 or y1 < 0 or x0 > grid.world_w or y0 > grid.world_h:
        return np.zeros(0, dtype=np.int64)
    ix0 = max(int(np.floor(x0 / grid.cell_w)), 0)
    iy0 = max(int(np.floor(y0 / grid.cell_h)), 0)
    ix1 = min(int(np.floor(x1 / grid.cell_w)), grid.n_x - 1)
    iy1 = min(int(np.floor(y1 / grid.cell_h)), grid.n_y - 1)
    if ix1 < ix0 or iy1 < iy0:
        return np.zeros(0, dtype=np.int64)

    ixs = np.arange(ix0, ix1 + 1)
    iys = np.arange(iy0, iy1 + 1)
    gx, gy = np.meshgrid(ixs, iys, indexing="ij")
    gx = gx.ravel()
    gy = gy.ravel()
    x_lo = gx * grid.cell_w
    y_lo = gy * grid.cell_h
    corners = np.empty((len(gx), 4, 2))
    corners[:, 0, 0] = x_lo
    corners[:, 0, 1] = y_lo
    corners[:, 1, 0] = x_lo + grid.cell_w
    corners[:, 1, 1] = y_lo
    corners[:, 2, 0] = x_lo + grid.cell_w
    corners[:, 2, 1] = y_lo + grid.cell_h
    corners[:, 3, 0] = x_lo
    corners[:, 3, 1] = y_lo + grid.cell_h
    hit = polygon_intersects_cells(poly, corners)
    return (gx[hit] * grid.n_y + gy[hit]).astype(np.int64)


def contexts_in_region(poly: ConvexPolygon, velocity: float, grid: ContextGrid) -> set[ContextId]:
    """All contexts whose spatial cell intersects the polygon and whose
    velocity interval contains the given velocity. The caller is responsible
    for excluding the sampling vehicle's own context."""
    iv = grid.velocity_bin(velocity)
    cells = spatial_cells_in_polygon(poly, grid)
    out = set()
    for f in cells:
        ix, iy = divmod(int(f), grid.n_y)
        out.add(ContextId(iv, ix, iy))
    return out
