"""Coordinate handling and the fixed square grid over a city extent.

The grid is axis-aligned in a local equirectangular projection anchored at
the boundary centroid latitude; the cell edge is converted to degrees once
at that latitude. Cells are half-open intervals, lower edge inclusive, so
every point belongs to at most one cell.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import shape as shapely_shape

from .errors import InputError

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_MILE = 1609.344
#: Ground length of one degree of latitude (great-circle arc), in miles.
MILES_PER_DEG_LAT = 2.0 * math.pi * EARTH_RADIUS_M / 360.0 / METERS_PER_MILE


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate pair; latitude in [-90, 90], longitude in [-180, 180]."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InputError(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not (-90.0 <= self.lat <= 90.0):
            raise InputError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise InputError(f"longitude out of range: {self.lon}")


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in meters."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def haversine_m_arrays(lat1, lon1, lat2, lon2):
    """Vectorized haversine distance in meters over coordinate arrays."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


@dataclass
class GridSpec:
    """A fixed grid of square cells over a city extent.

    ``active_mask`` marks cells whose rectangle overlaps the city boundary
    with positive area; only active cells receive box ids. Box ids number
    active cells in row-major order (south to north, west to east).
    """

    origin: GeoPoint            # southwest corner
    cell_miles: float
    n_cols: int
    n_rows: int
    active_mask: np.ndarray     # (n_rows, n_cols) bool
    ref_lat: float              # latitude at which cell_miles was converted to degrees

    _box_of_cell: np.ndarray = field(init=False, repr=False)
    _cells_of_box: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.cell_miles <= 0:
            raise InputError(f"cell_miles must be positive, got {self.cell_miles}")
        mask = np.asarray(self.active_mask, dtype=bool)
        if mask.shape != (self.n_rows, self.n_cols):
            raise InputError(
                f"active_mask shape {mask.shape} != ({self.n_rows}, {self.n_cols})"
            )
        self.active_mask = mask
        flat = mask.ravel()
        box_of_cell = np.full(flat.shape, -1, dtype=np.int64)
        box_of_cell[flat] = np.arange(int(flat.sum()))
        self._box_of_cell = box_of_cell
        self._cells_of_box = np.flatnonzero(flat)

    @property
    def n_active(self) -> int:
        return int(self._cells_of_box.size)

    @property
    def dlat_deg(self) -> float:
        return self.cell_miles / MILES_PER_DEG_LAT

    @property
    def dlon_deg(self) -> float:
        return self.cell_miles / (MILES_PER_DEG_LAT * math.cos(math.radians(self.ref_lat)))

    def box_rowcol(self, box_id: int):
        cell = int(self._cells_of_box[box_id])
        return cell // self.n_cols, cell % self.n_cols

    def box_centers_miles(self) -> np.ndarray:
        """(n_active, 2) centroid coordinates in the local projection, miles east/north of origin."""
        rows = self._cells_of_box // self.n_cols
        cols = self._cells_of_box % self.n_cols
        return np.column_stack(
            [(cols + 0.5) * self.cell_miles, (rows + 0.5) * self.cell_miles]
        ).astype(float)

    def box_centroid(self, box_id: int) -> GeoPoint:
        row, col = self.box_rowcol(box_id)
        return GeoPoint(
            lat=self.origin.lat + (row + 0.5) * self.dlat_deg,
            lon=self.origin.lon + (col + 0.5) * self.dlon_deg,
        )

    def box_polygon_lonlat(self, box_id: int):
        """Corner ring [(lon, lat), ...] of the cell rectangle, closed."""
        row, col = self.box_rowcol(box_id)
        w = self.origin.lon + col * self.dlon_deg
        e = w + self.dlon_deg
        s = self.origin.lat + row * self.dlat_deg
        n = s + self.dlat_deg
        return [(w, s), (e, s), (e, n), (w, n), (w, s)]

    def to_dict(self) -> dict:
        return {
            "origin_lat": self.origin.lat,
            "origin_lon": self.origin.lon,
            "cell_miles": self.cell_miles,
            "n_cols": self.n_cols,
            "n_rows": self.n_rows,
            "ref_lat": self.ref_lat,
            "active_cells": [int(c) for c in self._cells_of_box],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        mask = np.zeros(d["n_rows"] * d["n_cols"], dtype=bool)
        mask[np.asarray(d["active_cells"], dtype=np.int64)] = True
        return cls(
            origin=GeoPoint(d["origin_lat"], d["origin_lon"]),
            cell_miles=d["cell_miles"],
            n_cols=d["n_cols"],
            n_rows=d["n_rows"],
            active_mask=mask.reshape(d["n_rows"], d["n_cols"]),
            ref_lat=d["ref_lat"],
        )


def assign_box(p: GeoPoint, g: GridSpec):
    """Box id of the active cell containing ``p``, or None when outside."""
    box = assign_boxes(np.array([p.lat]), np.array([p.lon]), g)[0]
    return None if box < 0 else int(box)


def assign_boxes(lats, lons, g: GridSpec) -> np.ndarray:
    """Vectorized cell assignment; returns -1 for points in no active cell."""
    lats = np.asarray(lats, dtype=float)
    lons = np.asarray(lons, dtype=float)
    if not (np.all(np.isfinite(lats)) and np.all(np.isfinite(lons))):
        raise InputError("non-finite coordinates in assignment input")
    cols = np.floor((lons - g.origin.lon) / g.dlon_deg).astype(np.int64)
    rows = np.floor((lats - g.origin.lat) / g.dlat_deg).astype(np.int64)
    inside = (cols >= 0) & (cols < g.n_cols) & (rows >= 0) & (rows < g.n_rows)
    out = np.full(lats.shape, -1, dtype=np.int64)
    cells = rows[inside] * g.n_cols + cols[inside]
    out[inside] = g._box_of_cell[cells]
    return out


def load_boundary(path):
    """Load a city boundary from a GeoJSON file (Polygon or MultiPolygon).

    Accepts a bare geometry, a Feature, or a FeatureCollection whose
    features are merged into one geometry.
    """
    with open(path) as f:
        gj = json.load(f)
    return boundary_geometry(gj)


def boundary_geometry(gj):
    """Shapely geometry from GeoJSON-like dicts or shapely objects."""
    if isinstance(gj, shapely.Geometry):
        geom = gj
    elif gj.get("type") == "FeatureCollection":
        parts = [shapely_shape(feat["geometry"]) for feat in gj["features"]]
        if not parts:
            raise InputError("boundary FeatureCollection has no features")
        geom = shapely.union_all(parts)
    elif gj.get("type") == "Feature":
        geom = shapely_shape(gj["geometry"])
    else:
        geom = shapely_shape(gj)
    if geom.geom_type not in ("Polygon", "MultiPolygon"):
        raise InputError(f"boundary must be Polygon or MultiPolygon, got {geom.geom_type}")
    return geom


def grid_from_boundary(boundary, cell_miles: float = 0.1) -> GridSpec:
    """Grid whose active cells are exactly those overlapping the boundary.

    ``boundary`` may be a shapely polygon, a GeoJSON-like dict, or a path
    understood by :func:`load_boundary`. Overlap requires positive
    intersection area; cells merely touching an edge stay inactive.
    """
    if isinstance(boundary, (str, bytes)) or hasattr(boundary, "__fspath__"):
        boundary = load_boundary(boundary)
    else:
        boundary = boundary_geometry(boundary)
    if boundary.is_empty or boundary.area <= 0.0:
        raise InputError("boundary polygon is empty or degenerate")
    if cell_miles <= 0:
        raise InputError(f"cell_miles must be positive, got {cell_miles}")

    minx, miny, maxx, maxy = boundary.bounds
    ref_lat = float(boundary.centroid.y)
    dlat = cell_miles / MILES_PER_DEG_LAT
    dlon = cell_miles / (MILES_PER_DEG_LAT * math.cos(math.radians(ref_lat)))
    # the -1e-9 guards against an extra all-inactive column/row from fp noise
    n_cols = max(1, int(math.ceil((maxx - minx) / dlon - 1e-9)))
    n_rows = max(1, int(math.ceil((maxy - miny) / dlat - 1e-9)))

    cols, rows = np.meshgrid(np.arange(n_cols), np.arange(n_rows))
    west = minx + cols.ravel() * dlon
    south = miny + rows.ravel() * dlat
    cells = shapely.box(west, south, west + dlon, south + dlat)

    active = shapely.intersects(cells, boundary)
    # touching counts as intersecting in shapely; demand positive overlap area
    idx = np.flatnonzero(active)
    if idx.size:
        contained = shapely.contains_properly(boundary, cells[idx])
        border = idx[~contained]
        if border.size:
            areas = shapely.area(shapely.intersection(cells[border], boundary))
            active[border] = areas > 0.0
    return GridSpec(
        origin=GeoPoint(lat=miny, lon=minx),
        cell_miles=cell_miles,
        n_cols=n_cols,
        n_rows=n_rows,
        active_mask=active.reshape(n_rows, n_cols),
        ref_lat=ref_lat,
    )
