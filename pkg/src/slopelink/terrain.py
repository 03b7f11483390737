"""Heightfield terrain model: ESRI ASCII grid I/O, bilinear queries, sight lines.

A regular single-valued grid of elevation samples is the shared substrate for
annotation draping, visibility tests, and the descent simulator. World frame
is right-handed, X east, Y north, Z up, all meters. Grid nodes sit at
``(origin_x + j*cellsize, origin_y + i*cellsize)`` so the covered rectangle is
``(ncols-1) x (nrows-1)`` cells. The ASCII format stores rows north to south.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, TextIO

import numpy as np

from .config import OCCLUSION_EPS


class TerrainError(Exception):
    """Base class for terrain load/query failures."""


class MalformedHeaderError(TerrainError):
    """Header missing, unparseable, or violating a grid invariant."""


class DimensionMismatchError(TerrainError):
    """Number of elevation values does not equal ncols * nrows."""


class NoDataPresentError(TerrainError):
    """A cell equals NODATA_value; holes are rejected rather than interpolated."""


class NonFiniteElevationError(TerrainError):
    """An elevation is NaN, infinite, or not numeric at all."""


class OutOfBoundsError(TerrainError):
    """Query point lies outside the covered rectangle."""


@dataclass(frozen=True)
class WorldPoint:
    """A point in the shared world frame (meters east, north, up)."""

    x: float
    y: float
    z: float

    def xy_distance(self, other: "WorldPoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def distance(self, other: "WorldPoint") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )


class TerrainGrid:
    """Immutable elevation grid. Safe to share across threads after load."""

    def __init__(
        self,
        ncols: int,
        nrows: int,
        origin_x: float,
        origin_y: float,
        cellsize: float,
        elevations: Iterable[float],
    ):
        """``elevations`` is row-major, north row first, length ncols*nrows."""
        if ncols < 2 or nrows < 2:
            raise ValueError("grid needs at least 2 columns and 2 rows")
        if not (cellsize > 0):
            raise ValueError("cellsize must be positive")
        values = np.asarray(list(elevations), dtype=np.float64)
        if values.size != ncols * nrows:
            raise ValueError(f"expected {ncols * nrows} elevations, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("elevations must be finite")
        self.ncols = ncols
        self.nrows = nrows
        self.origin_x = float(origin_x)
        self.origin_y = float(origin_y)
        self.cellsize = float(cellsize)
        # Stored south row first so _z[i, j] is the node at
        # (origin_x + j*cellsize, origin_y + i*cellsize).
        self._z = np.flipud(values.reshape(nrows, ncols)).copy()
        self._z.setflags(write=False)

    @classmethod
    def from_function(
        cls,
        ncols: int,
        nrows: int,
        origin_x: float,
        origin_y: float,
        cellsize: float,
        fn: Callable[[float, float], float],
    ) -> "TerrainGrid":
        """Sample ``fn(x, y)`` at every grid node (handy for fixtures)."""
        rows = []
        for r in range(nrows):  # north first
            y = origin_y + (nrows - 1 - r) * cellsize
            rows.extend(fn(origin_x + j * cellsize, y) for j in range(ncols))
        return cls(ncols, nrows, origin_x, origin_y, cellsize, rows)

    # -- extent ---------------------------------------------------------

    @property
    def max_x(self) -> float:
        return self.origin_x + (self.ncols - 1) * self.cellsize

    @property
    def max_y(self) -> float:
        return self.origin_y + (self.nrows - 1) * self.cellsize

    def contains_xy(self, x: float, y: float) -> bool:
        return self.origin_x <= x <= self.max_x and self.origin_y <= y <= self.max_y

    @property
    def elevations(self) -> np.ndarray:
        """Row-major elevations, north row first (the storage contract)."""
        return np.flipud(self._z).reshape(-1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TerrainGrid):
            return NotImplemented
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and self.origin_x == other.origin_x
            and self.origin_y == other.origin_y
            and self.cellsize == other.cellsize
            and np.array_equal(self._z, other._z)
        )

    def __repr__(self) -> str:
        return (
            f"TerrainGrid({self.ncols}x{self.nrows}, origin=({self.origin_x}, "
            f"{self.origin_y}), cellsize={self.cellsize})"
        )

    # -- queries --------------------------------------------------------

    def _fractional(self, x: float, y: float) -> tuple[float, float]:
        fx = (x - self.origin_x) / self.cellsize
        fy = (y - self.origin_y) / self.cellsize
        if fx < 0 or fx > self.ncols - 1 or fy < 0 or fy > self.nrows - 1:
            raise OutOfBoundsError(f"({x}, {y}) outside terrain rectangle")
        return fx, fy

    def elevation_at(self, x: float, y: float) -> float:
        """Bilinear interpolation of the four surrounding nodes; exact at nodes."""
        fx, fy = self._fractional(x, y)
        j = min(int(math.floor(fx)), self.ncols - 2)
        i = min(int(math.floor(fy)), self.nrows - 2)
        u = fx - j
        v = fy - i
        z = self._z
        return float(
            z[i, j] * (1 - u) * (1 - v)
            + z[i, j + 1] * u * (1 - v)
            + z[i + 1, j] * (1 - u) * v
            + z[i + 1, j + 1] * u * v
        )

    def gradient_at(self, x: float, y: float) -> tuple[float, float]:
        """Central-difference slope (dz/dx, dz/dy) with step cellsize/2.

        Requires the point to sit at least one cellsize inside the boundary so
        both difference samples stay in bounds with margin. The margin check
        runs in fractional cell units with a 1e-9 tolerance; the actual
        samples keep half a cell of slack, so the epsilon is immaterial.
        """
        cs = self.cellsize
        fx = (x - self.origin_x) / cs
        fy = (y - self.origin_y) / cs
        eps = 1e-9
        if (
            fx < 1.0 - eps
            or fx > self.ncols - 2 + eps
            or fy < 1.0 - eps
            or fy > self.nrows - 2 + eps
        ):
            raise OutOfBoundsError(f"({x}, {y}) closer than one cellsize to the edge")
        h = cs / 2.0
        dzdx = (self.elevation_at(x + h, y) - self.elevation_at(x - h, y)) / (2 * h)
        dzdy = (self.elevation_at(x, y + h) - self.elevation_at(x, y - h)) / (2 * h)
        return dzdx, dzdy

    def snap_to_surface(self, x: float, y: float, lift: float = 0.0) -> WorldPoint:
        """World point on (or ``lift`` meters above) the surface at (x, y)."""
        if lift < 0:
            raise ValueError("lift must be >= 0")
        return WorldPoint(x, y, self.elevation_at(x, y) + lift)

    def line_of_sight(self, eye: WorldPoint, target: WorldPoint) -> bool:
        """True if the open segment eye->target clears the surface.

        The surface restricted to the segment is piecewise quadratic (bilinear
        patch cut by a line), so each cell crossing is tested by minimizing the
        quadratic clearance exactly; a dip of up to OCCLUSION_EPS below the
        surface is tolerated. Endpoints are exempt, so surface-anchored targets
        do not occlude themselves.
        """
        self._fractional(eye.x, eye.y)
        self._fractional(target.x, target.y)
        if eye == target:
            return True
        # Canonical endpoint order makes the test bit-exactly symmetric.
        a, b = sorted((eye, target), key=lambda p: (p.x, p.y, p.z))
        if a.x == b.x and a.y == b.y:
            return min(a.z, b.z) >= self.elevation_at(a.x, a.y) - OCCLUSION_EPS
        return self._clearance_min(a, b) >= -OCCLUSION_EPS

    def _clearance_min(self, a: WorldPoint, b: WorldPoint) -> float:
        """Minimum of (ray z - surface z) over the segment, computed per cell."""
        cs = self.cellsize
        fx0 = (a.x - self.origin_x) / cs
        fy0 = (a.y - self.origin_y) / cs
        fx1 = (b.x - self.origin_x) / cs
        fy1 = (b.y - self.origin_y) / cs
        dfx = fx1 - fx0
        dfy = fy1 - fy0
        dz = b.z - a.z

        cuts = [0.0, 1.0]
        for f0, df in ((fx0, dfx), (fy0, dfy)):
            if df == 0.0:
                continue
            lo, hi = (f0, f0 + df) if df > 0 else (f0 + df, f0)
            k = math.floor(lo) + 1
            while k < hi:
                t = (k - f0) / df
                if 0.0 < t < 1.0:
                    cuts.append(t)
                k += 1
        cuts.sort()

        z = self._z
        best = math.inf
        for t0, t1 in zip(cuts, cuts[1:]):
            if t1 - t0 <= 1e-12:
                continue
            tm = 0.5 * (t0 + t1)
            j = min(max(int(math.floor(fx0 + tm * dfx)), 0), self.ncols - 2)
            i = min(max(int(math.floor(fy0 + tm * dfy)), 0), self.nrows - 2)
            z00 = z[i, j]
            gx = z[i, j + 1] - z00
            gy = z[i + 1, j] - z00
            dd = z[i + 1, j + 1] - z[i, j + 1] - z[i + 1, j] + z00
            alpha = fx0 - j
            beta = dfx
            gamma = fy0 - i
            delta = dfy
            # clearance(t) = c0 + c1 t + c2 t^2 on this sub-interval
            c2 = -dd * beta * delta
            c1 = dz - (gx * beta + gy * delta + dd * (alpha * delta + beta * gamma))
            c0 = a.z - (z00 + gx * alpha + gy * gamma + dd * alpha * gamma)
            lo = min(c0 + c1 * t0 + c2 * t0 * t0, c0 + c1 * t1 + c2 * t1 * t1)
            if c2 > 0.0:
                tv = -c1 / (2.0 * c2)
                if t0 < tv < t1:
                    lo = min(lo, c0 + c1 * tv + c2 * tv * tv)
            if lo < best:
                best = lo
        return best


# -- ESRI ASCII grid I/O --------------------------------------------------

_HEADER_ORDER = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


def load_terrain(source: TextIO | str) -> TerrainGrid:
    """Parse an ESRI ASCII grid into a TerrainGrid.

    Headers are case-insensitive and must appear in the standard order
    (ncols, nrows, xllcorner, yllcorner, cellsize, then optional
    NODATA_value). Any NODATA cell is rejected outright: a silent hole in
    safety-critical terrain is worse than a loud failure.
    """
    text = source if isinstance(source, str) else source.read()
    tokens = text.split()
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise MalformedHeaderError("unexpected end of input in header")
        tok = tokens[pos]
        pos += 1
        return tok

    header: dict[str, float] = {}
    for name in _HEADER_ORDER:
        key = take()
        if key.lower() != name:
            raise MalformedHeaderError(f"expected header {name!r}, found {key!r}")
        raw = take()
        try:
            header[name] = float(raw)
        except ValueError:
            raise MalformedHeaderError(f"header {name} value {raw!r} is not numeric")

    nodata: float | None = None
    if pos < len(tokens) and tokens[pos].lower() == "nodata_value":
        pos += 1
        raw = take()
        try:
            nodata = float(raw)
        except ValueError:
            raise MalformedHeaderError(f"NODATA_value {raw!r} is not numeric")

    for name in ("ncols", "nrows"):
        if header[name] != int(header[name]):
            raise MalformedHeaderError(f"header {name} must be an integer")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols < 2 or nrows < 2:
        raise MalformedHeaderError("grid needs ncols >= 2 and nrows >= 2")
    if not (header["cellsize"] > 0):
        raise MalformedHeaderError("cellsize must be > 0")

    data = tokens[pos:]
    if len(data) != ncols * nrows:
        raise DimensionMismatchError(
            f"expected {ncols * nrows} elevation values, found {len(data)}"
        )
    values = []
    for tok in data:
        try:
            v = float(tok)
        except ValueError:
            raise NonFiniteElevationError(f"elevation {tok!r} is not numeric")
        if nodata is not None and v == nodata:
            raise NoDataPresentError("grid contains NODATA cells")
        if not math.isfinite(v):
            raise NonFiniteElevationError(f"elevation {tok!r} is not finite")
        values.append(v)

    return TerrainGrid(
        ncols, nrows, header["xllcorner"], header["yllcorner"], header["cellsize"], values
    )


def dump_terrain(grid: TerrainGrid) -> str:
    """Serialize back to ESRI ASCII; reloading yields an identical grid."""
    lines = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcorner {grid.origin_x!r}",
        f"yllcorner {grid.origin_y!r}",
        f"cellsize {grid.cellsize!r}",
    ]
    north_first = grid.elevations.reshape(grid.nrows, grid.ncols)
    for row in north_first:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
