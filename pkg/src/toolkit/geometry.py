"""Geometry types and point-in-polygon tests in lon/lat degrees."""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.data_processor import Table
from src.errors import CrsMismatch, InvalidParameter
from src.registry import BoundingBox

DEFAULT_CRS = "EPSG:4326"
BOUNDARY_EPS = 1e-9

Coordinate = Tuple[float, float]
Ring = Tuple[Coordinate, ...]
PolygonRings = Tuple[Ring, ...]


class GeometryKind(str, Enum):
    POINT = "Point"
    POLYGON = "Polygon"
    MULTIPOLYGON = "MultiPolygon"


def _ring(coords) -> Ring:
    return tuple((float(x), float(y)) for x, y in coords)


@dataclass(frozen=True)
class Geometry:
    """A Point, Polygon or MultiPolygon.

    ``coordinates`` follows the JSON interchange nesting: a pair for Point,
    a list of rings for Polygon (exterior first) and a list of those for
    MultiPolygon.
    """

    kind: GeometryKind
    coordinates: tuple

    @classmethod
    def point(cls, x: float, y: float) -> "Geometry":
        return cls(GeometryKind.POINT, (float(x), float(y)))

    @classmethod
    def polygon(cls, rings: Sequence[Sequence[Sequence[float]]]) -> "Geometry":
        return cls(GeometryKind.POLYGON, tuple(_ring(r) for r in rings))

    @classmethod
    def multipolygon(cls, polygons) -> "Geometry":
        return cls(GeometryKind.MULTIPOLYGON, tuple(tuple(_ring(r) for r in p) for p in polygons))

    @classmethod
    def from_json(cls, obj) -> "Geometry":
        kind = GeometryKind(obj["type"])
        if kind == GeometryKind.POINT:
            x, y = obj["coordinates"][:2]
            return cls.point(x, y)
        if kind == GeometryKind.POLYGON:
            return cls.polygon(obj["coordinates"])
        return cls.multipolygon(obj["coordinates"])

    def to_json(self):
        if self.kind == GeometryKind.POINT:
            return {"type": self.kind.value, "coordinates": list(self.coordinates)}
        if self.kind == GeometryKind.POLYGON:
            return {"type": self.kind.value, "coordinates": [[list(c) for c in r] for r in self.coordinates]}
        return {
            "type": self.kind.value,
            "coordinates": [[[list(c) for c in r] for r in p] for p in self.coordinates],
        }

    def polygons(self) -> List[PolygonRings]:
        """Polygon parts as lists of rings; empty for points."""
        if self.kind == GeometryKind.POLYGON:
            return [self.coordinates]
        if self.kind == GeometryKind.MULTIPOLYGON:
            return list(self.coordinates)
        return []

    def all_coordinates(self) -> List[Coordinate]:
        if self.kind == GeometryKind.POINT:
            return [self.coordinates]
        return [c for part in self.polygons() for ring in part for c in ring]

    @property
    def bbox(self) -> BoundingBox:
        coords = self.all_coordinates()
        return BoundingBox.from_points([c[0] for c in coords], [c[1] for c in coords])

    def translated(self, dx: float, dy: float) -> "Geometry":
        if self.kind == GeometryKind.POINT:
            return Geometry.point(self.coordinates[0] + dx, self.coordinates[1] + dy)
        shift = lambda ring: tuple((x + dx, y + dy) for x, y in ring)  # noqa: E731
        parts = tuple(tuple(shift(r) for r in p) for p in self.polygons())
        if self.kind == GeometryKind.POLYGON:
            return Geometry(self.kind, parts[0])
        return Geometry(self.kind, parts)


@dataclass
class FeatureTable:
    """Geometries with one attribute row each."""

    geometries: List[Geometry]
    attributes: Table
    crs_id: str = DEFAULT_CRS
    source_kind: Optional[str] = field(default=None)

    def __post_init__(self):
        if len(self.geometries) != self.attributes.row_count:
            raise InvalidParameter(
                f"{len(self.geometries)} geometries but {self.attributes.row_count} attribute rows"
            )

    def __len__(self):
        return len(self.geometries)

    @property
    def geometry_kind(self) -> str:
        kinds = sorted({g.kind.value for g in self.geometries})
        return "/".join(kinds) if kinds else "empty"

    @property
    def bbox(self) -> Optional[BoundingBox]:
        coords = [c for g in self.geometries for c in g.all_coordinates()]
        if not coords:
            return None
        return BoundingBox.from_points([c[0] for c in coords], [c[1] for c in coords])

    def schema_summary(self) -> str:
        bbox = self.bbox
        extent = str(bbox) if bbox else "none"
        attributes = self.attributes.schema_summary(limit=1600)
        return (f"features: {len(self)}; geometry: {self.geometry_kind}; bbox: {extent}; "
                f"crs: {self.crs_id}; attributes {attributes}")


def require_same_crs(*features: FeatureTable) -> None:
    crs = {f.crs_id for f in features}
    if len(crs) > 1:
        raise CrsMismatch(f"Assets use different coordinate systems: {sorted(crs)}; reprojection is not supported")


# ------------------------------------------------------------ ring arithmetic
def signed_area(ring: Sequence[Coordinate]) -> float:
    """Shoelace area; positive for counter-clockwise rings."""
    pts = np.asarray(ring, dtype=float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _edges(ring: Sequence[Coordinate]) -> Tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(ring, dtype=float)
    if len(pts) and not np.array_equal(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    return pts[:-1], pts[1:]


def on_ring_boundary(xs: np.ndarray, ys: np.ndarray, ring: Sequence[Coordinate],
                     eps: float = BOUNDARY_EPS) -> np.ndarray:
    """Mask of points lying on an edge or vertex of ``ring``."""
    start, end = _edges(ring)
    px, py = xs[:, None], ys[:, None]
    ax, ay, bx, by = start[:, 0], start[:, 1], end[:, 0], end[:, 1]
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    length = np.hypot(bx - ax, by - ay)
    collinear = np.abs(cross) <= eps * np.maximum(length, 1.0)
    within_x = (px >= np.minimum(ax, bx) - eps) & (px <= np.maximum(ax, bx) + eps)
    within_y = (py >= np.minimum(ay, by) - eps) & (py <= np.maximum(ay, by) + eps)
    return np.any(collinear & within_x & within_y, axis=1)


def ring_crossings(xs: np.ndarray, ys: np.ndarray, ring: Sequence[Coordinate]) -> np.ndarray:
    """Even-odd ray casting toward +x; True where the crossing count is odd."""
    start, end = _edges(ring)
    px, py = xs[:, None], ys[:, None]
    xi, yi, xj, yj = start[:, 0], start[:, 1], end[:, 0], end[:, 1]
    straddles = (yi > py) != (yj > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = (xj - xi) * (py - yi) / (yj - yi) + xi
    hits = straddles & (px < x_cross)
    return (np.sum(hits, axis=1) % 2) == 1


def points_in_polygon(xs, ys, rings: Sequence[Sequence[Coordinate]]) -> np.ndarray:
    """Vectorized containment for one polygon (exterior plus holes).

    Points on any ring boundary count as inside.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0:
        return np.zeros(0, dtype=bool)
    parity = np.zeros(xs.size, dtype=bool)
    boundary = np.zeros(xs.size, dtype=bool)
    for ring in rings:
        parity ^= ring_crossings(xs, ys, ring)
        boundary |= on_ring_boundary(xs, ys, ring)
    return parity | boundary


def point_in_polygon(point: Coordinate, rings: Sequence[Sequence[Coordinate]]) -> bool:
    return bool(points_in_polygon([point[0]], [point[1]], rings)[0])


def geometry_contains(geometry: Geometry, xs, ys) -> np.ndarray:
    """Containment mask against a Polygon or MultiPolygon (any part)."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    mask = np.zeros(xs.size, dtype=bool)
    for part in geometry.polygons():
        mask |= points_in_polygon(xs, ys, part)
    return mask
