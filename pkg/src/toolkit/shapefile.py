"""Shapefile subset reader/writer: Point (1) and Polygon (5) shapes with dBASE III attributes.

Main file and index headers are 100 bytes; record headers are big-endian,
coordinates little-endian doubles. Attribute files carry Character and
Numeric fields only.
"""
import os
from struct import Struct, error as StructError, pack, unpack
from typing import List, Tuple

import numpy as np
import pandas as pd

from src.data_processor import ColumnKind, Table, infer_column
from src.errors import AttributeCountMismatch, MalformedHeader, UnsupportedShapeType
from src.toolkit.geometry import Geometry, GeometryKind, FeatureTable, signed_area
from src.utils.formatting import format_value, is_null
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

FILE_CODE = 9994
VERSION = 1000
SHAPE_POINT = 1
SHAPE_POLYGON = 5
SUPPORTED_SHAPES = {SHAPE_POINT: "Point", SHAPE_POLYGON: "Polygon"}

_RECORD_HEADER = Struct(">2i")
# Fixed header date keeps written files byte-identical across runs
_DBF_DATE = (100, 1, 1)


def sibling(path: str, extension: str) -> str:
    stem, _ = os.path.splitext(path)
    for candidate in (stem + extension, stem + extension.upper()):
        if os.path.exists(candidate):
            return candidate
    return stem + extension


# ----------------------------------------------------------------------- read
def _read_header(data: bytes, name: str) -> int:
    if len(data) < 100:
        raise MalformedHeader(f"{name}: file shorter than the 100-byte header")
    code = unpack(">i", data[0:4])[0]
    if code != FILE_CODE:
        raise MalformedHeader(f"{name}: file code {code}, expected {FILE_CODE}")
    version, shape_type = unpack("<2i", data[28:36])
    if version != VERSION:
        raise MalformedHeader(f"{name}: version {version}, expected {VERSION}")
    return shape_type


def _group_rings(rings: List[List[Tuple[float, float]]]) -> Geometry:
    """Clockwise rings open a new polygon; counter-clockwise rings are holes of the last one."""
    polygons: List[List[List[Tuple[float, float]]]] = []
    for ring in rings:
        if not polygons or signed_area(ring) < 0:
            polygons.append([ring])
        else:
            polygons[-1].append(ring)
    if len(polygons) == 1:
        return Geometry.polygon(polygons[0])
    return Geometry.multipolygon(polygons)


def read_shp(path: str) -> List[Geometry]:
    name = os.path.basename(path)
    with open(path, "rb") as handle:
        data = handle.read()
    shape_type = _read_header(data, name)
    if shape_type not in SUPPORTED_SHAPES:
        raise UnsupportedShapeType(f"{name}: shape type {shape_type} is not supported (only 1 Point, 5 Polygon)")

    geometries = []
    offset = 100
    try:
        while offset < len(data):
            number, words = _RECORD_HEADER.unpack(data[offset:offset + 8])
            start = offset + 8
            end = start + words * 2
            content = data[start:end]
            record_type = unpack("<i", content[0:4])[0]
            if record_type not in SUPPORTED_SHAPES:
                raise UnsupportedShapeType(f"{name}: record {number} has shape type {record_type}")
            if record_type == SHAPE_POINT:
                x, y = unpack("<2d", content[4:20])
                geometries.append(Geometry.point(x, y))
            else:
                n_parts, n_points = unpack("<2i", content[36:44])
                parts = list(unpack(f"<{n_parts}i", content[44:44 + 4 * n_parts]))
                base = 44 + 4 * n_parts
                flat = unpack(f"<{2 * n_points}d", content[base:base + 16 * n_points])
                points = list(zip(flat[0::2], flat[1::2]))
                bounds = parts + [n_points]
                rings = [points[bounds[i]:bounds[i + 1]] for i in range(n_parts)]
                geometries.append(_group_rings(rings))
            offset = end
    except StructError as e:
        raise MalformedHeader(f"{name}: truncated record at byte {offset}: {e}")
    return geometries


def read_dbf(path: str) -> Table:
    name = os.path.basename(path)
    with open(path, "rb") as handle:
        data = handle.read()
    if len(data) < 33:
        raise MalformedHeader(f"{name}: file shorter than the dBASE header")
    n_records, header_length, record_length = unpack("<xxxxLHH20x", data[:32])
    n_fields = (header_length - 33) // 32
    fields = []
    for i in range(n_fields):
        raw = data[32 + 32 * i: 64 + 32 * i]
        field_name, field_type, size, decimals = unpack("<11sc4xBB14x", raw)
        field_name = field_name.split(b"\x00")[0].decode("ascii").strip()
        fields.append((field_name, field_type.decode("ascii"), size, decimals))
    if data[32 + 32 * n_fields:33 + 32 * n_fields] != b"\r":
        raise MalformedHeader(f"{name}: dBASE header lacks its terminator")

    fmt = Struct("1s" + "".join(f"{size}s" for _, _, size, _ in fields))
    columns = {f[0]: [] for f in fields}
    position = header_length
    for _ in range(n_records):
        values = fmt.unpack(data[position:position + fmt.size])
        position += record_length
        if values[0] == b"*":
            continue
        for (field_name, _, _, _), value in zip(fields, values[1:]):
            columns[field_name].append(value.decode("utf-8", errors="replace").strip().replace("\x00", ""))

    names = [f[0] for f in fields]
    kinds, resolutions, converted = {}, {}, {}
    for field_name, field_type, _, _ in fields:
        raw_values = pd.Series(columns[field_name], dtype=object)
        if field_type in ("N", "F"):
            converted[field_name] = pd.to_numeric(raw_values.where(raw_values != "", None), errors="coerce").astype(float)
            kinds[field_name] = ColumnKind.NUMBER
        else:
            kind, resolution, values = infer_column(raw_values)
            converted[field_name] = values
            kinds[field_name] = kind
            if resolution:
                resolutions[field_name] = resolution
    return Table(pd.DataFrame(converted, columns=names), kinds, resolutions)


def read_shapefile(path: str) -> FeatureTable:
    """Read ``.shp`` plus its sibling ``.dbf`` into a FeatureTable."""
    geometries = read_shp(path)
    dbf_path = sibling(path, ".dbf")
    if not os.path.exists(dbf_path):
        raise MalformedHeader(f"{os.path.basename(path)}: sibling attribute file {os.path.basename(dbf_path)} not found")
    attributes = read_dbf(dbf_path)
    if attributes.row_count != len(geometries):
        raise AttributeCountMismatch(
            f"{os.path.basename(path)}: {len(geometries)} shapes but {attributes.row_count} attribute records"
        )
    logger.info(f"Read {len(geometries)} shapes from {os.path.basename(path)}")
    return FeatureTable(geometries, attributes, source_kind="shapefile")


# ---------------------------------------------------------------------- write
def _oriented(ring, clockwise: bool):
    ring = list(ring)
    if ring[0] != ring[-1]:
        ring.append(ring[0])
    area = signed_area(ring)
    if (clockwise and area > 0) or (not clockwise and area < 0):
        ring.reverse()
    return ring


def _record_content(geometry: Geometry) -> bytes:
    if geometry.kind == GeometryKind.POINT:
        return pack("<i2d", SHAPE_POINT, *geometry.coordinates)
    rings = []
    for part in geometry.polygons():
        rings.append(_oriented(part[0], clockwise=True))
        rings.extend(_oriented(hole, clockwise=False) for hole in part[1:])
    points = [p for ring in rings for p in ring]
    parts, total = [], 0
    for ring in rings:
        parts.append(total)
        total += len(ring)
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    content = pack("<i4d2i", SHAPE_POLYGON, min(xs), min(ys), max(xs), max(ys), len(parts), len(points))
    content += pack(f"<{len(parts)}i", *parts)
    content += pack(f"<{2 * len(points)}d", *[c for p in points for c in p])
    return content


def _file_header(shape_type: int, length_words: int, bbox) -> bytes:
    header = pack(">6i", FILE_CODE, 0, 0, 0, 0, 0)
    header += pack(">i", length_words)
    header += pack("<2i", VERSION, shape_type)
    header += pack("<4d", *bbox)
    header += pack("<4d", 0.0, 0.0, 0.0, 0.0)
    return header


def _dbf_fields(table: Table) -> List[Tuple[str, str, int, int]]:
    fields = []
    for column in table.columns:
        if len(column) > 10:
            raise MalformedHeader(f"dBASE field names are limited to 10 characters: '{column}'")
        if table.kinds[column] == ColumnKind.NUMBER:
            values = table.frame[column].dropna()
            integral = bool(np.all(np.mod(values, 1) == 0)) if len(values) else True
            fields.append((column, "N", 18, 0 if integral else 8))
        else:
            width = max([1] + [len(table.cell_text(column, v).encode("utf-8"))
                               for v in table.frame[column] if not is_null(v)])
            fields.append((column, "C", min(width, 254), 0))
    return fields


def _dbf_bytes(table: Table) -> bytes:
    fields = _dbf_fields(table)
    header_length = 32 * len(fields) + 33
    record_length = 1 + sum(f[2] for f in fields)
    out = pack("<BBBBLHH20x", 3, *_DBF_DATE, table.row_count, header_length, record_length)
    for field_name, field_type, size, decimals in fields:
        out += pack("<11sc4xBB14x", field_name.encode("ascii"), field_type.encode("ascii"), size, decimals)
    out += b"\r"
    for row in table.frame.itertuples(index=False, name=None):
        out += b" "
        for (field_name, field_type, size, decimals), value in zip(fields, row):
            if is_null(value):
                cell = b" " * size
            elif field_type == "N":
                text = f"{float(value):.{decimals}f}" if decimals else str(int(round(float(value))))
                cell = text.encode("ascii")[:size].rjust(size)
            else:
                text = format_value(value, table.resolutions.get(field_name))
                cell = text.encode("utf-8")[:size].ljust(size)
            out += cell
    out += b"\x1a"
    return out


def write_shapefile(path: str, features: FeatureTable) -> List[str]:
    """Write ``.shp``, ``.shx`` and ``.dbf`` for ``features``; returns the written paths."""
    kinds = {g.kind for g in features.geometries}
    if kinds == {GeometryKind.POINT}:
        shape_type = SHAPE_POINT
    elif kinds <= {GeometryKind.POLYGON, GeometryKind.MULTIPOLYGON} and kinds:
        shape_type = SHAPE_POLYGON
    else:
        raise UnsupportedShapeType(f"Cannot write mixed or empty geometry kinds {sorted(k.value for k in kinds)}")

    bbox = features.bbox
    bounds = bbox.as_list()
    contents = [_record_content(g) for g in features.geometries]
    shp_body, shx_body = b"", b""
    offset = 100
    for number, content in enumerate(contents, start=1):
        words = len(content) // 2
        shp_body += pack(">2i", number, words) + content
        shx_body += pack(">2i", offset // 2, words)
        offset += 8 + len(content)

    stem, _ = os.path.splitext(path)
    shp_path, shx_path, dbf_path = stem + ".shp", stem + ".shx", stem + ".dbf"
    with open(shp_path, "wb") as handle:
        handle.write(_file_header(shape_type, (100 + len(shp_body)) // 2, bounds) + shp_body)
    with open(shx_path, "wb") as handle:
        handle.write(_file_header(shape_type, (100 + len(shx_body)) // 2, bounds) + shx_body)
    with open(dbf_path, "wb") as handle:
        handle.write(_dbf_bytes(features.attributes))
    logger.info(f"Wrote {len(contents)} shapes to {os.path.basename(shp_path)}")
    return [shp_path, shx_path, dbf_path]

