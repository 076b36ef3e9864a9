"""Raster-modality toolkit: categorical land-cover grids, clipping and class proportions."""
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from src.data_processor import ColumnKind, Table
from src.errors import (
    AllNoData,
    CellCountMismatch,
    LegendMismatch,
    MalformedHeader,
    NoOverlap,
    ParseError,
    TypeMismatch,
    UnknownClassCode,
)
from src.registry import AssetDescriptor, AssetRegistry, BoundingBox, Modality, new_guid
from src.toolkit.geometry import Geometry, geometry_contains
from src.toolkit.tabular import register_table
from src.toolkit.vector import area_of_interest, load_features
from src.utils.latency_tracker import measure_latency
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")
DEFAULT_NODATA = -9999
LEGEND_EXTENSION = ".legend"
SNAP_TOLERANCE = 1e-9


@dataclass
class ClassRaster:
    """Grid of class codes; row 0 is the northern edge."""

    cells: np.ndarray
    xll: float
    yll: float
    cell_size: float
    nodata: int = DEFAULT_NODATA
    class_names: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.cell_size <= 0:
            raise MalformedHeader(f"cellsize must be positive; got {self.cell_size}")
        self.cells = np.asarray(self.cells, dtype=np.int64)
        if self.cells.ndim != 2 or 0 in self.cells.shape:
            raise CellCountMismatch(f"Raster cells must form a non-empty 2-D grid; got shape {self.cells.shape}")

    @property
    def nrows(self) -> int:
        return int(self.cells.shape[0])

    @property
    def ncols(self) -> int:
        return int(self.cells.shape[1])

    @property
    def extent(self) -> BoundingBox:
        return BoundingBox(self.xll, self.yll, self.xll + self.ncols * self.cell_size,
                           self.yll + self.nrows * self.cell_size)

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        cols = np.arange(self.ncols)
        rows = np.arange(self.nrows)
        xs = self.xll + (cols + 0.5) * self.cell_size
        ys = self.yll + (self.nrows - rows - 0.5) * self.cell_size
        return np.meshgrid(xs, ys)

    def counts(self) -> Dict[int, int]:
        """Cell count per legend class, nodata excluded."""
        valid = self.cells[self.cells != self.nodata]
        codes, tallies = np.unique(valid, return_counts=True)
        counts = {code: 0 for code in sorted(self.class_names)}
        counts.update({int(c): int(t) for c, t in zip(codes, tallies)})
        return counts

    def check_codes(self) -> None:
        present = set(np.unique(self.cells).tolist()) - {self.nodata}
        unknown = sorted(present - set(self.class_names))
        if unknown:
            raise UnknownClassCode(f"Cell codes {unknown} are neither nodata nor in the legend")

    def schema_summary(self) -> str:
        legend = ", ".join(f"{code}={label}" for code, label in sorted(self.class_names.items()))
        text = (f"grid: {self.nrows}x{self.ncols}; cell size: {self.cell_size!r}; nodata: {self.nodata}; "
                f"extent: {self.extent}; classes: {legend}")
        return text[:2048]


# ------------------------------------------------------------------- reading
def legend_path(path: str) -> str:
    return os.path.splitext(path)[0] + LEGEND_EXTENSION


def read_legend(path: str) -> Dict[int, str]:
    if not os.path.exists(path):
        raise MalformedHeader(f"Class legend {os.path.basename(path)} not found")
    frame = pd.read_csv(path, header=None, names=["code", "label"], dtype=str,
                        keep_default_na=False, skipinitialspace=True)
    if len(frame) and not frame.iloc[0]["code"].strip().lstrip("-").isdigit():
        frame = frame.iloc[1:]
    try:
        return {int(code): label.strip() for code, label in zip(frame["code"], frame["label"])}
    except ValueError as e:
        raise MalformedHeader(f"{os.path.basename(path)}: legend codes must be integers ({e})")


def read_ascii_grid(path: str) -> ClassRaster:
    """Parse an ESRI ASCII grid of integer class codes plus its ``.legend`` sibling."""
    name = os.path.basename(path)
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().split("\n")

    header: Dict[str, str] = {}
    body_start = 0
    for index, line in enumerate(lines):
        parts = line.split()
        if len(parts) == 2 and parts[0][0].isalpha():
            header[parts[0].lower()] = parts[1]
            body_start = index + 1
        elif parts:
            break
    header.setdefault("nodata_value", str(DEFAULT_NODATA))
    if "xllcenter" in header and "xllcorner" not in header and "cellsize" in header:
        half = float(header["cellsize"]) / 2.0
        header["xllcorner"] = str(float(header.pop("xllcenter")) - half)
        header["yllcorner"] = str(float(header.pop("yllcenter", "nan")) - half)
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise MalformedHeader(f"{name}: header lacks {', '.join(missing)}")
    try:
        ncols, nrows = int(header["ncols"]), int(header["nrows"])
        xll, yll = float(header["xllcorner"]), float(header["yllcorner"])
        cell_size = float(header["cellsize"])
        nodata = int(float(header["nodata_value"]))
    except ValueError as e:
        raise MalformedHeader(f"{name}: non-numeric header value ({e})")
    if ncols <= 0 or nrows <= 0 or not math.isfinite(xll) or not math.isfinite(yll):
        raise MalformedHeader(f"{name}: invalid grid dimensions or origin")

    tokens = " ".join(lines[body_start:]).split()
    if len(tokens) != nrows * ncols:
        raise CellCountMismatch(f"{name}: header declares {nrows * ncols} cells, body has {len(tokens)}")
    try:
        cells = np.array([int(t) for t in tokens], dtype=np.int64).reshape(nrows, ncols)
    except ValueError as e:
        raise ParseError(f"{name}: cell values must be integers ({e})")

    raster = ClassRaster(cells, xll, yll, cell_size, nodata, read_legend(legend_path(path)))
    raster.check_codes()
    return raster


def write_ascii_grid(path: str, raster: ClassRaster) -> None:
    """Write the grid and its legend sibling."""
    lines = [
        f"ncols {raster.ncols}",
        f"nrows {raster.nrows}",
        f"xllcorner {raster.xll!r}",
        f"yllcorner {raster.yll!r}",
        f"cellsize {raster.cell_size!r}",
        f"NODATA_value {raster.nodata}",
    ]
    lines.extend(" ".join(str(int(v)) for v in row) for row in raster.cells)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    with open(legend_path(path), "w", encoding="utf-8") as handle:
        for code, label in sorted(raster.class_names.items()):
            handle.write(f"{code},{label}\n")


# ------------------------------------------------------------------ registry
def load_raster(registry: AssetRegistry, ref: str) -> Tuple[str, ClassRaster]:
    asset = registry.find(ref)
    if asset.modality != Modality.RASTER:
        raise TypeMismatch(f"Asset {asset.filename} is {asset.modality.value}, expected Raster")
    return asset.guid, registry.payload(asset.guid)


def register_raster(registry: AssetRegistry, raster: ClassRaster, parents, relation: str,
                    name: Optional[str] = None, time_tag: Optional[str] = None) -> str:
    guid = new_guid()
    path = registry.output_path(guid, ".asc")
    write_ascii_grid(path, raster)
    descriptor = AssetDescriptor(
        modality=Modality.RASTER,
        uri=path,
        schema_summary=raster.schema_summary(),
        geo_extent=raster.extent,
        time_tag=time_tag,
        name=name,
    )
    return registry.derive(descriptor, parents, relation, payload=raster, guid=guid)


@measure_latency("parse_grid")
def parse_grid(uri: str, registry: AssetRegistry, name: Optional[str] = None,
               time_tag: Optional[str] = None) -> str:
    """Ingest an ASCII class grid as a root Raster asset."""
    try:
        logger.info(f"Parsing grid {uri}")
        raster = read_ascii_grid(uri)
        descriptor = AssetDescriptor(
            modality=Modality.RASTER,
            uri=os.path.abspath(uri),
            schema_summary=raster.schema_summary(),
            geo_extent=raster.extent,
            time_tag=time_tag,
            name=name,
        )
        guid = registry.register_asset(descriptor)
        registry.put_payload(guid, raster)
        logger.info(f"Grid {os.path.basename(uri)}: {raster.nrows}x{raster.ncols}, {len(raster.class_names)} classes")
        return guid
    except (MalformedHeader, CellCountMismatch, UnknownClassCode, ParseError):
        logger.error(f"Could not parse grid {uri}", exc_info=True)
        raise


# ---------------------------------------------------------------------- clip
def _snap_down(value: float) -> int:
    return int(math.floor(value + SNAP_TOLERANCE))


def _snap_up(value: float) -> int:
    return int(math.ceil(value - SNAP_TOLERANCE))


def clip_raster(raster: ClassRaster, aoi: Geometry) -> ClassRaster:
    """Window to the aoi bounding box snapped outward, then null cells whose centers fall outside."""
    box = aoi.bbox
    extent = raster.extent
    if not (box.min_lon < extent.max_lon and box.max_lon > extent.min_lon
            and box.min_lat < extent.max_lat and box.max_lat > extent.min_lat):
        raise NoOverlap(f"Area of interest {box} does not overlap raster extent {extent}")
    cs = raster.cell_size
    top = raster.yll + raster.nrows * cs
    c0 = max(0, _snap_down((box.min_lon - raster.xll) / cs))
    c1 = min(raster.ncols, _snap_up((box.max_lon - raster.xll) / cs))
    r0 = max(0, _snap_down((top - box.max_lat) / cs))
    r1 = min(raster.nrows, _snap_up((top - box.min_lat) / cs))
    if c0 >= c1 or r0 >= r1:
        raise NoOverlap(f"Area of interest {box} covers no whole cell of the raster")

    window = ClassRaster(
        raster.cells[r0:r1, c0:c1].copy(),
        raster.xll + c0 * cs,
        top - r1 * cs,
        cs,
        raster.nodata,
        dict(raster.class_names),
    )
    xs, ys = window.cell_centers()
    inside = geometry_contains(aoi, xs.ravel(), ys.ravel()).reshape(window.cells.shape)
    window.cells[~inside] = raster.nodata
    return window


@measure_latency("clip")
def clip(registry: AssetRegistry, raster: str, aoi: str, column: Optional[str] = None,
         value=None, name: Optional[str] = None) -> str:
    """Clip a raster to polygons of a Vector asset (selected by ``column == value``, or all)."""
    raster_guid, source = load_raster(registry, raster)
    aoi_guid, features = load_features(registry, aoi)
    geometry = area_of_interest(features, column, value)
    result = clip_raster(source, geometry)
    kept = int(np.sum(result.cells != result.nodata))
    logger.info(f"clip: {result.nrows}x{result.ncols} window, {kept} cells inside the area of interest")
    time_tag = registry.resolve(raster_guid).time_tag
    return register_raster(registry, result, [raster_guid, aoi_guid], "clip", name=name, time_tag=time_tag)


# --------------------------------------------------------------- proportions
def proportions(raster: ClassRaster) -> Dict[int, float]:
    counts = raster.counts()
    total = sum(counts.values())
    if total == 0:
        raise AllNoData("Raster has no cells outside nodata")
    return {code: count / total for code, count in counts.items()}


@measure_latency("class_proportions")
def class_proportions(registry: AssetRegistry, raster: str) -> Dict[int, float]:
    """Fraction of non-nodata cells per legend class."""
    _, source = load_raster(registry, raster)
    return proportions(source)


def proportion_frame(raster: ClassRaster) -> Table:
    counts = raster.counts()
    shares = proportions(raster)
    frame = pd.DataFrame({
        "code": [float(c) for c in counts],
        "class": [raster.class_names.get(c, str(c)) for c in counts],
        "cells": [float(n) for n in counts.values()],
        "proportion": [shares[c] for c in counts],
    })
    return Table.from_frame(frame, {"code": ColumnKind.NUMBER, "class": ColumnKind.TEXT,
                                    "cells": ColumnKind.NUMBER, "proportion": ColumnKind.NUMBER})


@measure_latency("proportion_table")
def proportion_table(registry: AssetRegistry, raster: str, name: Optional[str] = None) -> str:
    """Register the class proportions of a raster as a derived table."""
    guid, source = load_raster(registry, raster)
    return register_table(registry, proportion_frame(source), [guid], "summarize", name=name)


def change_frame(before: ClassRaster, after: ClassRaster) -> Table:
    shared = set(before.class_names) & set(after.class_names)
    if not shared:
        raise LegendMismatch("The two rasters share no class codes")
    conflicts = sorted(c for c in shared if before.class_names[c] != after.class_names[c])
    if conflicts:
        raise LegendMismatch(f"Class codes {conflicts} carry different labels in the two legends")
    p_before, p_after = proportions(before), proportions(after)
    codes = sorted(set(before.class_names) | set(after.class_names))
    names = {**after.class_names, **before.class_names}
    frame = pd.DataFrame({
        "code": [float(c) for c in codes],
        "class": [names[c] for c in codes],
        "before": [p_before.get(c, 0.0) for c in codes],
        "after": [p_after.get(c, 0.0) for c in codes],
    })
    frame["delta"] = frame["after"] - frame["before"]
    kinds = {"code": ColumnKind.NUMBER, "class": ColumnKind.TEXT, "before": ColumnKind.NUMBER,
             "after": ColumnKind.NUMBER, "delta": ColumnKind.NUMBER}
    return Table.from_frame(frame, kinds)


@measure_latency("proportion_change")
def proportion_change(registry: AssetRegistry, before: str, after: str,
                      name: Optional[str] = None) -> Tuple[str, Dict[int, Tuple[float, float, float]]]:
    """Per-class (p_before, p_after, delta), registered as a derived Table."""
    before_guid, before_raster = load_raster(registry, before)
    after_guid, after_raster = load_raster(registry, after)
    table = change_frame(before_raster, after_raster)
    changes = {
        int(row["code"]): (row["before"], row["after"], row["delta"])
        for row in table.records()
    }
    guid = register_table(registry, table, [before_guid, after_guid], "change", name=name)
    logger.info(f"proportion_change: {len(changes)} classes compared")
    return guid, changes
