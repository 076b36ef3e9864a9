"""Map canvas: equirectangular lon/lat to pixel projection over a padded viewport."""
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from src.config import RENDER_CONFIG
from src.errors import EmptyViewport
from src.registry import BoundingBox
from src.toolkit.geometry import Geometry

RGB = Tuple[int, int, int]
TEXT_COLOR = (0, 0, 0)
LEGEND_LINE = 12


@dataclass
class MapCanvas:
    """Pixel canvas over a geographic viewport.

    The viewport is widened along one axis so both axes share one
    degrees-per-pixel scale.
    """

    width: int
    height: int
    viewport: BoundingBox
    background: RGB = field(default_factory=lambda: tuple(RENDER_CONFIG["background"]))

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise EmptyViewport(f"Canvas must have positive size; got {self.width}x{self.height}")
        if not (self.viewport.width > 0 and self.viewport.height > 0):
            raise EmptyViewport(f"Viewport {self.viewport} has no area")
        self.scale = max(self.viewport.width / self.width, self.viewport.height / self.height)
        cx, cy = self.viewport.center
        half_w = self.width * self.scale / 2.0
        half_h = self.height * self.scale / 2.0
        self.fitted = BoundingBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h)

    @classmethod
    def for_extent(cls, extent: Optional[BoundingBox], width: Optional[int] = None,
                   height: Optional[int] = None, padding: Optional[float] = None,
                   background: Optional[RGB] = None) -> "MapCanvas":
        if extent is None:
            raise EmptyViewport("Nothing to draw: no extent for the viewport")
        padding = RENDER_CONFIG["padding"] if padding is None else padding
        return cls(
            width or RENDER_CONFIG["width"],
            height or RENDER_CONFIG["height"],
            extent.padded(padding),
            tuple(background or RENDER_CONFIG["background"]),
        )

    def to_pixel(self, lon, lat) -> Tuple[np.ndarray, np.ndarray]:
        """Continuous pixel coordinates; pixel (i, j) spans [i, i+1) x [j, j+1)."""
        px = (np.asarray(lon, dtype=float) - self.fitted.min_lon) / self.scale
        py = (self.fitted.max_lat - np.asarray(lat, dtype=float)) / self.scale
        return px, py

    def to_geo(self, px, py) -> Tuple[np.ndarray, np.ndarray]:
        lon = self.fitted.min_lon + np.asarray(px, dtype=float) * self.scale
        lat = self.fitted.max_lat - np.asarray(py, dtype=float) * self.scale
        return lon, lat

    def new_image(self) -> Image.Image:
        return Image.new("RGB", (self.width, self.height), tuple(self.background))

    def describe(self) -> dict:
        return {"width": self.width, "height": self.height, "viewport": self.fitted.as_list()}


def _ring_pixels(canvas: MapCanvas, ring) -> List[Tuple[float, float]]:
    xs, ys = canvas.to_pixel([c[0] for c in ring], [c[1] for c in ring])
    return list(zip(xs.tolist(), ys.tolist()))


def draw_polygon(draw: ImageDraw.ImageDraw, canvas: MapCanvas, geometry: Geometry,
                 stroke: RGB, fill: Optional[RGB] = None) -> None:
    """Fill (holes restored to background) and stroke every part of a polygon geometry."""
    for part in geometry.polygons():
        exterior = _ring_pixels(canvas, part[0])
        if len(exterior) < 3:
            continue
        if fill is not None:
            draw.polygon(exterior, fill=tuple(fill))
            for hole in part[1:]:
                draw.polygon(_ring_pixels(canvas, hole), fill=tuple(canvas.background))
        for ring in part:
            draw.line(_ring_pixels(canvas, ring), fill=tuple(stroke), width=1)


def draw_markers(draw: ImageDraw.ImageDraw, canvas: MapCanvas, lons: Sequence[float],
                 lats: Sequence[float], color: RGB, radius: int) -> None:
    xs, ys = canvas.to_pixel(lons, lats)
    for x, y in zip(xs.tolist(), ys.tolist()):
        if np.isnan(x) or np.isnan(y):
            continue
        draw.ellipse([x - radius, y - radius, x + radius, y + radius], fill=tuple(color))


def draw_legend(draw: ImageDraw.ImageDraw, entries: Iterable[Tuple[Optional[RGB], str]],
                origin: Tuple[int, int] = (6, 6)) -> None:
    """Swatch-and-label rows stacked from the top-left corner."""
    draw.fontmode = "1"
    x, y = origin
    for color, label in entries:
        if color is not None:
            draw.rectangle([x, y + 2, x + 8, y + 10], fill=tuple(color))
        draw.text((x + 12, y), label, fill=TEXT_COLOR)
        y += LEGEND_LINE
