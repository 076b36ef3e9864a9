"""Distribution-map renderers writing Image assets: cluster maps, choropleths and heatmaps."""
import json
import os
import tempfile
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from matplotlib.colors import LinearSegmentedColormap
from PIL import Image, ImageDraw

from src.config import RenderSettings
from src.errors import AllNull, EmptyPoints, MissingLabelColumn, UnknownColumn
from src.registry import AssetDescriptor, AssetRegistry, BoundingBox, Modality, new_guid
from src.toolkit.geometry import FeatureTable
from src.toolkit.vector import load_features, point_table
from src.utils.formatting import format_number
from src.utils.latency_tracker import measure_latency
from src.utils.logger import setup_logger
from src.visualization.canvas import MapCanvas, draw_legend, draw_markers, draw_polygon

logger = setup_logger(__name__)

RAMP_STEPS = 5
MAX_LEGEND_ROWS = 12


# ------------------------------------------------------------------- output
def _atomic_write(path: str, write) -> None:
    directory = os.path.dirname(path) or "."
    handle, temp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(handle)
    try:
        write(temp_path)
        os.replace(temp_path, path)
    finally:
        if os.path.exists(temp_path):
            os.remove(temp_path)


def _write_json(path: str, document: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)


def save_image(registry: AssetRegistry, image: Image.Image, canvas: MapCanvas, parents: Sequence[str],
               kind: str, settings: RenderSettings, name: Optional[str] = None) -> str:
    """Write the image (PPM, optional PNG) plus a JSON sidecar and register it."""
    guid = new_guid()
    path = registry.output_path(guid, ".ppm")
    _atomic_write(path, lambda target: image.save(target, format="PPM"))
    if settings.write_png:
        _atomic_write(os.path.splitext(path)[0] + ".png", lambda target: image.save(target, format="PNG"))
    sidecar = {
        "map": kind,
        **canvas.describe(),
        "palette_version": settings.palette_version,
        "inputs": list(parents),
    }
    _atomic_write(os.path.splitext(path)[0] + ".json", lambda target: _write_json(target, sidecar))
    descriptor = AssetDescriptor(
        modality=Modality.IMAGE,
        uri=path,
        schema_summary=f"image: {canvas.width}x{canvas.height} ppm; map: {kind}; viewport: {canvas.fitted}",
        geo_extent=canvas.fitted,
        name=name,
    )
    guid = registry.derive(descriptor, parents, "render", payload=image, guid=guid)
    logger.info(f"Rendered {kind} map {os.path.basename(path)} from {len(parents)} inputs")
    return guid


def _canvas_for(extent: Optional[BoundingBox], canvas: Optional[MapCanvas],
                settings: RenderSettings) -> MapCanvas:
    if canvas is not None:
        return canvas
    return MapCanvas.for_extent(extent, settings.width, settings.height, settings.padding, settings.background)


def _draw_basemap(draw: ImageDraw.ImageDraw, canvas: MapCanvas, basemap: Optional[FeatureTable],
                  settings: RenderSettings) -> None:
    if basemap is None:
        return
    for geometry in basemap.geometries:
        draw_polygon(draw, canvas, geometry, settings.stroke)


def cluster_color(cluster: int, settings: RenderSettings) -> Tuple[int, int, int]:
    return tuple(settings.palette[cluster % len(settings.palette)])


# ------------------------------------------------------------- cluster map
def draw_cluster_map(canvas: MapCanvas, lons, lats, labels, basemap: Optional[FeatureTable],
                     settings: RenderSettings) -> Image.Image:
    image = canvas.new_image()
    draw = ImageDraw.Draw(image)
    _draw_basemap(draw, canvas, basemap, settings)
    lons, lats, labels = np.asarray(lons, float), np.asarray(lats, float), np.asarray(labels, int)
    noise = labels < 0
    draw_markers(draw, canvas, lons[noise], lats[noise], settings.noise, settings.marker_radius)
    clusters, sizes = np.unique(labels[~noise], return_counts=True)
    for cluster in clusters.tolist():
        members = labels == cluster
        draw_markers(draw, canvas, lons[members], lats[members], cluster_color(cluster, settings),
                     settings.marker_radius)
    entries = [(cluster_color(c, settings), f"cluster {c}: {s}")
               for c, s in zip(clusters.tolist(), sizes.tolist())]
    if len(entries) > MAX_LEGEND_ROWS:
        entries = entries[:MAX_LEGEND_ROWS] + [(None, f"... {len(entries) - MAX_LEGEND_ROWS} more")]
    if noise.any():
        entries.append((settings.noise, f"noise: {int(noise.sum())}"))
    draw_legend(draw, entries)
    return image


@measure_latency("render_cluster_map")
def render_cluster_map(registry: AssetRegistry, points: str, basemap: str, label_column: str = "cluster",
                       canvas: Optional[MapCanvas] = None, settings: Optional[RenderSettings] = None,
                       name: Optional[str] = None) -> str:
    """Clustered points over a polygon basemap; noise grey, clusters from the fixed palette."""
    settings = settings or RenderSettings()
    points_guid, table, (lon, lat), _ = point_table(registry, points)
    if label_column not in table.kinds:
        raise MissingLabelColumn(
            f"Point table has no '{label_column}' column; run dbscan first. Columns: {', '.join(table.columns)}"
        )
    table.require_number(label_column)
    basemap_guid, features = load_features(registry, basemap)
    canvas = _canvas_for(features.bbox, canvas, settings)
    labels = table.frame[label_column].fillna(-1).to_numpy(dtype=float).astype(int)
    image = draw_cluster_map(canvas, table.frame[lon], table.frame[lat], labels, features, settings)
    return save_image(registry, image, canvas, [points_guid, basemap_guid], "cluster", settings, name=name)


# -------------------------------------------------------------- choropleth
def ramp_bins(values: np.ndarray, steps: int = RAMP_STEPS) -> Tuple[np.ndarray, np.ndarray]:
    """Bin index per value over [min, max]; NaN maps to -1, a flat range to the middle bin."""
    present = values[~np.isnan(values)]
    if present.size == 0:
        raise AllNull("Every polygon value is null")
    low, high = float(present.min()), float(present.max())
    edges = np.linspace(low, high, steps + 1)
    bins = np.full(values.shape, -1, dtype=int)
    valid = ~np.isnan(values)
    if high == low:
        bins[valid] = steps // 2
    else:
        bins[valid] = np.clip(np.floor((values[valid] - low) / (high - low) * steps), 0, steps - 1).astype(int)
    return bins, edges


def draw_choropleth(canvas: MapCanvas, features: FeatureTable, values: np.ndarray,
                    settings: RenderSettings) -> Image.Image:
    bins, edges = ramp_bins(values, len(settings.ramp))
    image = canvas.new_image()
    draw = ImageDraw.Draw(image)
    for geometry, index in zip(features.geometries, bins.tolist()):
        fill = settings.ramp[index] if index >= 0 else settings.null_fill
        draw_polygon(draw, canvas, geometry, settings.stroke, fill=fill)
    entries = [
        (settings.ramp[i], f"{format_number(round(edges[i], 6))} - {format_number(round(edges[i + 1], 6))}")
        for i in range(len(settings.ramp))
    ]
    if (bins < 0).any():
        entries.append((settings.null_fill, "no data"))
    draw_legend(draw, entries)
    return image


@measure_latency("render_choropleth")
def render_choropleth(registry: AssetRegistry, polygons: str, value_column: str,
                      canvas: Optional[MapCanvas] = None, settings: Optional[RenderSettings] = None,
                      name: Optional[str] = None) -> str:
    """Fill polygons by a 5-step sequential ramp over the value range."""
    settings = settings or RenderSettings()
    guid, features = load_features(registry, polygons)
    attributes = features.attributes
    if value_column not in attributes.kinds:
        raise UnknownColumn(f"Polygon attribute '{value_column}' not found; available: {', '.join(attributes.columns)}")
    attributes.require_number(value_column)
    values = attributes.frame[value_column].to_numpy(dtype=float)
    canvas = _canvas_for(features.bbox, canvas, settings)
    image = draw_choropleth(canvas, features, values, settings)
    return save_image(registry, image, canvas, [guid], "choropleth", settings, name=name)


# ----------------------------------------------------------------- heatmap
def density_surface(canvas: MapCanvas, px: np.ndarray, py: np.ndarray, weights: np.ndarray,
                    bandwidth: float) -> np.ndarray:
    """Unnormalized Gaussian kernel sum evaluated at pixel centers, shape (height, width)."""
    centers_x = np.arange(canvas.width) + 0.5
    centers_y = np.arange(canvas.height) + 0.5
    gx = np.exp(-((centers_x[None, :] - px[:, None]) ** 2) / (2.0 * bandwidth ** 2))
    gy = np.exp(-((centers_y[None, :] - py[:, None]) ** 2) / (2.0 * bandwidth ** 2))
    return gy.T @ (weights[:, None] * gx)


def heat_colormap(settings: RenderSettings) -> LinearSegmentedColormap:
    return LinearSegmentedColormap.from_list(
        "heat", [tuple(c / 255.0 for c in rgb) for rgb in settings.heat_ramp], 256
    )


def draw_heatmap(canvas: MapCanvas, lons, lats, weights, basemap: Optional[FeatureTable],
                 settings: RenderSettings) -> Image.Image:
    px, py = canvas.to_pixel(lons, lats)
    density = density_surface(canvas, px, py, np.asarray(weights, dtype=float), settings.bandwidth)
    peak = float(density.max())
    if peak <= 0:
        raise EmptyPoints("Heatmap has zero total intensity")
    normalized = density / peak
    colors = heat_colormap(settings)(normalized)[..., :3] * 255.0
    base = canvas.new_image()
    _draw_basemap(ImageDraw.Draw(base), canvas, basemap, settings)
    alpha = normalized[..., None]
    blended = np.asarray(base, dtype=float) * (1.0 - alpha) + colors * alpha
    image = Image.fromarray(np.clip(np.rint(blended), 0, 255).astype(np.uint8))
    draw = ImageDraw.Draw(image)
    draw_legend(draw, [(tuple(settings.heat_ramp[0]), "low"), (tuple(settings.heat_ramp[-1]), "high")])
    return image


@measure_latency("render_heatmap")
def render_heatmap(registry: AssetRegistry, points: str, intensity_column: Optional[str] = None,
                   basemap: Optional[str] = None, canvas: Optional[MapCanvas] = None,
                   settings: Optional[RenderSettings] = None, name: Optional[str] = None) -> str:
    """Kernel-density surface of the points mapped through the heat ramp."""
    settings = settings or RenderSettings()
    points_guid, table, (lon, lat), _ = point_table(registry, points)
    frame = table.frame[table.frame[lon].notna() & table.frame[lat].notna()]
    if frame.empty:
        raise EmptyPoints("Heatmap needs at least one point with coordinates")
    if intensity_column is None:
        weights = np.ones(len(frame))
    else:
        table.require_number(intensity_column)
        weights = frame[intensity_column].fillna(0.0).to_numpy(dtype=float)
    parents: List[str] = [points_guid]
    features = None
    extent = BoundingBox.from_points(frame[lon].tolist(), frame[lat].tolist())
    if basemap is not None:
        basemap_guid, features = load_features(registry, basemap)
        parents.append(basemap_guid)
        extent = features.bbox
    canvas = _canvas_for(extent, canvas, settings)
    image = draw_heatmap(canvas, frame[lon], frame[lat], weights, features, settings)
    return save_image(registry, image, canvas, parents, "heatmap", settings, name=name)


def pixel_census(image: Image.Image) -> Dict[Tuple[int, int, int], int]:
    """Count of pixels per RGB colour."""
    pixels = np.asarray(image.convert("RGB")).reshape(-1, 3)
    colors, counts = np.unique(pixels, axis=0, return_counts=True)
    return {tuple(int(v) for v in c): int(n) for c, n in zip(colors, counts)}
