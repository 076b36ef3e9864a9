"""Vector-modality toolkit: parse, validate and spatially align point and polygon sets."""
import json
import os
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.data_processor import ColumnKind, Table, infer_column
from src.errors import (
    AlignmentDisabled,
    CrsMismatch,
    DegenerateRing,
    InvalidParameter,
    MalformedHeader,
    MissingCoordinateColumns,
    TypeMismatch,
    UnknownColumn,
    UnsupportedShapeType,
)
from src.registry import AssetDescriptor, AssetRegistry, Modality, new_guid
from src.toolkit.geometry import (
    DEFAULT_CRS,
    FeatureTable,
    Geometry,
    GeometryKind,
    geometry_contains,
    signed_area,
)
from src.toolkit.shapefile import read_shapefile
from src.toolkit.tabular import coordinate_columns, load_table, register_table
from src.utils.formatting import format_value, is_null
from src.utils.latency_tracker import measure_latency
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

VECTOR_EXTENSIONS = (".shp", ".geojson", ".json")


# ------------------------------------------------------------------ JSON form
def _property_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_geojson(path: str) -> FeatureTable:
    name = os.path.basename(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as e:
        raise MalformedHeader(f"{name}: not valid JSON ({e})")
    if document.get("type") != "FeatureCollection" or not isinstance(document.get("features"), list):
        raise MalformedHeader(f"{name}: expected a FeatureCollection with a features list")

    geometries, rows, keys = [], [], []
    for index, feature in enumerate(document["features"]):
        geometry = feature.get("geometry") or {}
        try:
            geometries.append(Geometry.from_json(geometry))
        except (KeyError, TypeError, ValueError):
            raise UnsupportedShapeType(f"{name}: feature {index} has geometry type {geometry.get('type')!r}")
        properties = feature.get("properties") or {}
        for key in properties:
            if key not in keys:
                keys.append(key)
        rows.append(properties)

    raw = {key: pd.Series([_property_text(row.get(key)) for row in rows], dtype=object) for key in keys}
    kinds, resolutions, columns = {}, {}, {}
    for key in keys:
        kind, resolution, values = infer_column(raw[key])
        kinds[key], columns[key] = kind, values
        if resolution:
            resolutions[key] = resolution
    attributes = Table(pd.DataFrame(columns, columns=keys, index=range(len(rows))), kinds, resolutions)
    crs = ((document.get("crs") or {}).get("properties") or {}).get("name") or DEFAULT_CRS
    return FeatureTable(geometries, attributes, crs_id=crs, source_kind="geojson")


def _json_value(table: Table, column: str, value) -> Any:
    if is_null(value):
        return None
    kind = table.kinds[column]
    if kind == ColumnKind.NUMBER:
        value = float(value)
        return int(value) if value.is_integer() and abs(value) < 1e15 else value
    if kind == ColumnKind.BOOLEAN:
        return bool(value)
    return format_value(value, table.resolutions.get(column))


def write_geojson(path: str, features: FeatureTable) -> None:
    columns = features.attributes.columns
    records = features.attributes.frame.itertuples(index=False, name=None)
    document = {
        "type": "FeatureCollection",
        "crs": {"type": "name", "properties": {"name": features.crs_id}},
        "features": [
            {
                "type": "Feature",
                "geometry": geometry.to_json(),
                "properties": {c: _json_value(features.attributes, c, v) for c, v in zip(columns, row)},
            }
            for geometry, row in zip(features.geometries, records)
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle)
        handle.write("\n")


def read_features(path: str) -> FeatureTable:
    extension = os.path.splitext(path)[1].lower()
    if extension == ".shp":
        return read_shapefile(path)
    if extension in (".geojson", ".json"):
        return read_geojson(path)
    raise UnsupportedShapeType(f"{os.path.basename(path)}: unsupported vector format {extension!r}")


# ------------------------------------------------------------------- registry
def load_features(registry: AssetRegistry, ref: str) -> Tuple[str, FeatureTable]:
    asset = registry.find(ref)
    if asset.modality != Modality.VECTOR:
        raise TypeMismatch(f"Asset {asset.filename} is {asset.modality.value}, expected Vector")
    return asset.guid, registry.payload(asset.guid)


def register_features(registry: AssetRegistry, features: FeatureTable, parents: Sequence[str],
                      relation: str, name: Optional[str] = None) -> str:
    guid = new_guid()
    path = registry.output_path(guid, ".geojson")
    write_geojson(path, features)
    descriptor = AssetDescriptor(
        modality=Modality.VECTOR,
        uri=path,
        schema_summary=features.schema_summary(),
        geo_extent=features.bbox,
        name=name,
    )
    return registry.derive(descriptor, parents, relation, payload=features, guid=guid)


@measure_latency("parse_vector")
def parse_vector(uri: str, registry: AssetRegistry, name: Optional[str] = None,
                 time_tag: Optional[str] = None) -> str:
    """Ingest a shapefile or JSON feature collection as a root Vector asset."""
    try:
        logger.info(f"Parsing vector file {uri}")
        features = read_features(uri)
        descriptor = AssetDescriptor(
            modality=Modality.VECTOR,
            uri=os.path.abspath(uri),
            schema_summary=features.schema_summary(),
            geo_extent=features.bbox,
            time_tag=time_tag,
            name=name,
        )
        guid = registry.register_asset(descriptor)
        registry.put_payload(guid, features)
        logger.info(f"Vector {os.path.basename(uri)}: {len(features)} {features.geometry_kind} features")
        return guid
    except (MalformedHeader, UnsupportedShapeType):
        logger.error(f"Could not parse vector file {uri}", exc_info=True)
        raise


# ------------------------------------------------------------------ validation
def _repair_ring(ring, exterior: bool, label: str, report: List[str]):
    distinct = {tuple(c) for c in ring}
    if len(distinct) < 3:
        raise DegenerateRing(f"{label} has {len(distinct)} distinct vertices")
    ring = list(ring)
    if ring[0] != ring[-1]:
        ring.append(ring[0])
        report.append(f"{label}: closed ring")
    area = signed_area(ring)
    if (exterior and area < 0) or (not exterior and area > 0):
        ring.reverse()
        report.append(f"{label}: reversed {'exterior' if exterior else 'interior'} ring winding")
    return ring


def validate_features(features: FeatureTable) -> Tuple[FeatureTable, List[str]]:
    """Close rings, fix winding (exterior CCW, holes CW) and drop degenerate features."""
    report: List[str] = []
    kept_geometries, kept_rows = [], []
    for index, geometry in enumerate(features.geometries):
        if geometry.kind == GeometryKind.POINT:
            kept_geometries.append(geometry)
            kept_rows.append(index)
            continue
        try:
            parts = []
            for p, part in enumerate(geometry.polygons()):
                rings = [
                    _repair_ring(ring, r == 0, f"feature {index} part {p} ring {r}", report)
                    for r, ring in enumerate(part)
                ]
                parts.append(rings)
        except DegenerateRing as e:
            report.append(f"DegenerateRing: {e}; feature {index} dropped")
            continue
        if geometry.kind == GeometryKind.POLYGON:
            kept_geometries.append(Geometry.polygon(parts[0]))
        else:
            kept_geometries.append(Geometry.multipolygon(parts))
        kept_rows.append(index)
    attributes = features.attributes
    frame = attributes.frame.iloc[kept_rows].reset_index(drop=True)
    repaired = FeatureTable(
        kept_geometries,
        Table(frame, dict(attributes.kinds), dict(attributes.resolutions)),
        crs_id=features.crs_id,
    )
    return repaired, report


@measure_latency("validate_geometry")
def validate_geometry(registry: AssetRegistry, asset: str, name: Optional[str] = None) -> Tuple[str, List[str]]:
    """Register a repaired copy of a Vector asset and return it with the repair report."""
    parent, features = load_features(registry, asset)
    repaired, report = validate_features(features)
    logger.info(f"validate_geometry {parent}: {len(report)} repairs, {len(repaired)} features kept")
    return register_features(registry, repaired, [parent], "validate", name=name), report


# --------------------------------------------------------------- spatial join
def point_table(registry: AssetRegistry, ref: str) -> Tuple[str, Table, Tuple[str, str], Optional[str]]:
    """Point source as (guid, table, (lon, lat) columns, crs) from a Table or a Point Vector asset."""
    asset = registry.find(ref)
    if asset.modality == Modality.TABLE:
        guid, table = load_table(registry, ref)
        pair = coordinate_columns(table)
        if pair is None:
            raise MissingCoordinateColumns(
                f"{asset.filename} has no numeric lon/lat columns; columns: {', '.join(table.columns)}"
            )
        return guid, table, pair, None
    guid, features = load_features(registry, ref)
    if any(g.kind != GeometryKind.POINT for g in features.geometries):
        raise MissingCoordinateColumns(f"{asset.filename} holds {features.geometry_kind} features, not points")
    frame = features.attributes.frame.copy()
    lon, lat = ("lon", "lat") if "lon" not in frame.columns else ("lon_pt", "lat_pt")
    frame[lon] = [g.coordinates[0] for g in features.geometries]
    frame[lat] = [g.coordinates[1] for g in features.geometries]
    kinds = dict(features.attributes.kinds)
    kinds.update({lon: ColumnKind.NUMBER, lat: ColumnKind.NUMBER})
    return guid, Table(frame, kinds, dict(features.attributes.resolutions)), (lon, lat), features.crs_id


def tag_points(table: Table, pair: Tuple[str, str], features: FeatureTable, tag_column: str) -> Table:
    """Append the tag of the first polygon (file order) containing each point."""
    features.attributes.kind(tag_column)
    xs = table.frame[pair[0]].to_numpy(dtype=float)
    ys = table.frame[pair[1]].to_numpy(dtype=float)
    valid = ~(np.isnan(xs) | np.isnan(ys))
    owner = np.full(len(xs), -1, dtype=int)
    for index, geometry in enumerate(features.geometries):
        if geometry.kind == GeometryKind.POINT:
            continue
        open_points = valid & (owner < 0)
        if not open_points.any():
            break
        inside = np.zeros(len(xs), dtype=bool)
        inside[open_points] = geometry_contains(geometry, xs[open_points], ys[open_points])
        owner[inside] = index
    tags = features.attributes.frame[tag_column].tolist()
    output = tag_column if tag_column not in table.kinds else f"{tag_column}_r"
    frame = table.frame.copy()
    frame[output] = [tags[i] if i >= 0 else None for i in owner]
    kinds = dict(table.kinds)
    kinds[output] = features.attributes.kinds[tag_column]
    resolutions = dict(table.resolutions)
    if tag_column in features.attributes.resolutions:
        resolutions[output] = features.attributes.resolutions[tag_column]
    return Table.from_frame(frame, kinds, resolutions)


@measure_latency("spatial_join")
def spatial_join(registry: AssetRegistry, points: str, polygons: str, tag_column: str,
                 name: Optional[str] = None) -> str:
    """Tag every point with an attribute of its containing polygon."""
    if not registry.alignment:
        raise AlignmentDisabled("spatial_join needs spatial alignment, which is disabled in this configuration")
    points_guid, table, pair, crs = point_table(registry, points)
    polygons_guid, features = load_features(registry, polygons)
    if tag_column not in features.attributes.kinds:
        raise UnknownColumn(
            f"Polygon attribute '{tag_column}' not found; available: {', '.join(features.attributes.columns)}"
        )
    if crs is not None and crs != features.crs_id:
        raise CrsMismatch(f"Points use {crs} but polygons use {features.crs_id}; reprojection is not supported")
    result = tag_points(table, pair, features, tag_column)
    tagged = int(pd.Series(result.frame.iloc[:, -1]).notna().sum())
    logger.info(f"spatial_join: {tagged} of {result.row_count} points tagged with '{tag_column}'")
    return register_table(registry, result, [points_guid, polygons_guid], "spatial_join", name=name)


# ------------------------------------------------------------ join_attributes
def attach_attributes(features: FeatureTable, table: Table, key: str) -> FeatureTable:
    attributes = features.attributes
    left_kind, right_kind = attributes.kind(key), table.kind(key)
    if left_kind != right_kind:
        raise TypeMismatch(f"Key '{key}' is {left_kind.value} on the polygons and {right_kind.value} in the table")
    renamed = {c: (f"{c}_r" if c in attributes.kinds and c != key else c) for c in table.columns}
    right = table.frame[table.frame[key].notna()].drop_duplicates(subset=[key], keep="first")
    right = right.rename(columns=renamed)
    merged = pd.merge(attributes.frame, right, on=key, how="left", sort=False)
    kinds = dict(attributes.kinds)
    resolutions = dict(attributes.resolutions)
    for original, new in renamed.items():
        if original != key:
            kinds[new] = table.kinds[original]
            if original in table.resolutions:
                resolutions[new] = table.resolutions[original]
    return FeatureTable(list(features.geometries), Table.from_frame(merged, kinds, resolutions),
                        crs_id=features.crs_id)


@measure_latency("join_attributes")
def join_attributes(registry: AssetRegistry, polygons: str, table: str, key: str,
                    name: Optional[str] = None) -> str:
    """Attach table columns to polygon attributes by key (left join, first match)."""
    polygons_guid, features = load_features(registry, polygons)
    table_guid, source = load_table(registry, table)
    result = attach_attributes(features, source, key)
    logger.info(f"join_attributes on '{key}': {len(result)} features")
    return register_features(registry, result, [polygons_guid, table_guid], "join", name=name)


# ---------------------------------------------------------------- area select
def area_of_interest(features: FeatureTable, column: Optional[str] = None, value: Any = None) -> Geometry:
    """Polygon (or MultiPolygon of all matches) whose ``column`` equals ``value``."""
    if column is None:
        chosen = [g for g in features.geometries if g.kind != GeometryKind.POINT]
    else:
        features.attributes.kind(column)
        cells = features.attributes.frame[column].tolist()
        wanted = str(value)
        chosen = [
            g for g, cell in zip(features.geometries, cells)
            if g.kind != GeometryKind.POINT and features.attributes.cell_text(column, cell) == wanted
        ]
    if not chosen:
        raise InvalidParameter(f"No polygon has {column} == {value!r}")
    if len(chosen) == 1:
        return chosen[0]
    return Geometry.multipolygon([part for g in chosen for part in g.polygons()])

