"""Table-modality toolkit: read, filter, join, describe and aggregate tables."""
import csv
import json
import os
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src.data_processor import ColumnKind, RESOLUTIONS, Table, coerce_literal
from src.errors import (
    InvalidParameter,
    ParseError,
    RaggedRow,
    TypeMismatch,
)
from src.registry import AssetDescriptor, AssetRegistry, BoundingBox, Modality, new_guid
from src.utils.latency_tracker import measure_latency
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

OPERATORS = ("==", "!=", "<", "<=", ">", ">=", "contains", "in_year_range")
AGGREGATES = ("count", "sum", "mean")
JOIN_KINDS = ("inner", "left")
COORDINATE_PAIRS = (("lon", "lat"), ("longitude", "latitude"), ("lng", "lat"), ("x", "y"))

_EXPECTED_FIELDS = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


# --------------------------------------------------------------------- helpers
def coordinate_columns(table: Table) -> Optional[Tuple[str, str]]:
    """Names of the lon/lat columns of ``table`` if it has a numeric pair."""
    lookup = {c.lower(): c for c in table.columns}
    for lon, lat in COORDINATE_PAIRS:
        if lon in lookup and lat in lookup:
            lon_col, lat_col = lookup[lon], lookup[lat]
            if table.kinds[lon_col] == ColumnKind.NUMBER and table.kinds[lat_col] == ColumnKind.NUMBER:
                return lon_col, lat_col
    return None


def table_extent(table: Table) -> Optional[BoundingBox]:
    pair = coordinate_columns(table)
    if pair is None:
        return None
    coords = table.frame[list(pair)].dropna()
    if coords.empty:
        return None
    return BoundingBox.from_points(coords[pair[0]], coords[pair[1]])


def table_time_tag(table: Table) -> Optional[str]:
    """Year span covered by the table's timestamp columns."""
    years = []
    for column in table.columns:
        if table.kinds[column] == ColumnKind.TIMESTAMP:
            values = table.frame[column].dropna()
            if not values.empty:
                years.extend([values.min().year, values.max().year])
    if not years:
        return None
    first, last = min(years), max(years)
    return str(first) if first == last else f"{first}/{last}"


def load_table(registry: AssetRegistry, ref: str) -> Tuple[str, Table]:
    """Resolve a reference to a Table asset and return (guid, payload)."""
    asset = registry.find(ref)
    if asset.modality != Modality.TABLE:
        raise TypeMismatch(f"Asset {asset.filename} is {asset.modality.value}, expected Table")
    return asset.guid, registry.payload(asset.guid)


def register_table(registry: AssetRegistry, table: Table, parents: Sequence[str], relation: str,
                   name: Optional[str] = None, time_tag: Optional[str] = None) -> str:
    """Write a derived table to ``<guid>.csv`` under the run directory and register it."""
    guid = new_guid()
    path = registry.output_path(guid, ".csv")
    table.to_csv(path)
    descriptor = AssetDescriptor(
        modality=Modality.TABLE,
        uri=path,
        schema_summary=table.schema_summary(),
        geo_extent=table_extent(table),
        time_tag=time_tag or table_time_tag(table),
        name=name,
    )
    return registry.derive(descriptor, parents, relation, payload=table, guid=guid)


# ------------------------------------------------------------------- read_table
def _check_field_counts(path: str, expected: int) -> None:
    """Raise RaggedRow for the first non-blank line whose field count differs from the header."""
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        for fields in reader:
            if fields and len(fields) != expected:
                raise RaggedRow(
                    f"{os.path.basename(path)}: row has {len(fields)} fields, header has {expected}",
                    line=reader.line_num,
                )


def read_csv_table(path: str) -> Table:
    """Parse a comma-separated file with a header row into a typed Table."""
    if not os.path.exists(path):
        raise ParseError(f"File not found: {path}")
    try:
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise ParseError(f"{os.path.basename(path)} is empty", line=1)
    except pd.errors.ParserError as e:
        match = _EXPECTED_FIELDS.search(str(e))
        if match:
            expected, line, seen = (int(g) for g in match.groups())
            raise RaggedRow(
                f"{os.path.basename(path)}: row has {seen} fields, header has {expected}", line=line
            )
        raise ParseError(f"{os.path.basename(path)}: {e}")
    except UnicodeDecodeError as e:
        raise ParseError(f"{os.path.basename(path)} is not UTF-8: {e}")

    header = [str(h).strip() for h in raw.iloc[0].tolist()]
    if any(h == "" for h in header):
        raise ParseError(f"{os.path.basename(path)}: empty column name in header", line=1)
    if len(set(header)) != len(header):
        raise ParseError(f"{os.path.basename(path)}: duplicate column names in header", line=1)
    _check_field_counts(path, len(header))
    return Table.from_strings(header, raw.iloc[1:].values.tolist())


@measure_latency("read_table")
def read_table(uri: str, registry: AssetRegistry, name: Optional[str] = None,
               time_tag: Optional[str] = None) -> str:
    """Ingest a CSV file as a root Table asset."""
    try:
        logger.info(f"Reading table {uri}")
        table = read_csv_table(uri)
        descriptor = AssetDescriptor(
            modality=Modality.TABLE,
            uri=os.path.abspath(uri),
            schema_summary=table.schema_summary(),
            geo_extent=table_extent(table),
            time_tag=time_tag or table_time_tag(table),
            name=name,
        )
        guid = registry.register_asset(descriptor)
        registry.put_payload(guid, table)
        logger.info(f"Table {os.path.basename(uri)}: {table.row_count} rows, {len(table.columns)} columns")
        return guid
    except ParseError:
        logger.error(f"Could not parse {uri}", exc_info=True)
        raise


# ------------------------------------------------------------------ filter_rows
@dataclass(frozen=True)
class Predicate:
    column: str
    op: str
    value: Any


@dataclass(frozen=True)
class FilterSpec:
    """Conjunction of atomic predicates."""

    predicates: Tuple[Predicate, ...]

    @classmethod
    def parse(cls, spec) -> "FilterSpec":
        """Accept a JSON string, a list of {column, op, value} objects or [column, op, value] triples."""
        if isinstance(spec, str):
            try:
                spec = json.loads(spec)
            except json.JSONDecodeError as e:
                raise InvalidParameter(f"Filter spec is not valid JSON: {e}")
        if isinstance(spec, dict):
            spec = spec.get("predicates", [spec])
        if not isinstance(spec, list) or not spec:
            raise InvalidParameter("Filter spec must be a non-empty list of predicates")
        predicates = []
        for item in spec:
            if isinstance(item, dict):
                try:
                    predicate = Predicate(item["column"], item["op"], item.get("value"))
                except KeyError as e:
                    raise InvalidParameter(f"Predicate {item} is missing {e}")
            elif isinstance(item, (list, tuple)) and len(item) == 3:
                predicate = Predicate(*item)
            else:
                raise InvalidParameter(f"Cannot read predicate {item!r}")
            if predicate.op not in OPERATORS:
                raise InvalidParameter(f"Unknown operator {predicate.op!r}; use one of {', '.join(OPERATORS)}")
            predicates.append(predicate)
        return cls(tuple(predicates))

    def describe(self) -> str:
        return " and ".join(f"{p.column} {p.op} {p.value!r}" for p in self.predicates)


_COMPARE = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _timestamp_key(series: pd.Series, resolution: str) -> pd.Series:
    if resolution == "year":
        return series.dt.year
    if resolution == "month":
        return series.dt.year * 12 + series.dt.month
    return series.dt.normalize()


def _literal_key(stamp: pd.Timestamp, resolution: str):
    if resolution == "year":
        return stamp.year
    if resolution == "month":
        return stamp.year * 12 + stamp.month
    return stamp.normalize()


def _coarser(a: str, b: str) -> str:
    return RESOLUTIONS[min(RESOLUTIONS.index(a), RESOLUTIONS.index(b))]


def _year_bounds(value, column: str) -> Tuple[int, int]:
    if isinstance(value, str):
        value = re.split(r"\s*[,/]\s*|\s+to\s+|\s*-\s*(?=\d{4}$)", value.strip())
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise TypeMismatch(f"in_year_range on '{column}' needs [start, end]; got {value!r}")
    try:
        start, end = int(value[0]), int(value[1])
    except (TypeError, ValueError):
        raise TypeMismatch(f"in_year_range on '{column}' needs integer years; got {value!r}")
    if start > end:
        raise InvalidParameter(f"in_year_range start {start} is after end {end}")
    return start, end


def predicate_mask(table: Table, predicate: Predicate) -> pd.Series:
    """Boolean mask of rows satisfying one predicate; Null cells never match."""
    column, op, value = predicate.column, predicate.op, predicate.value
    kind = table.kind(column)
    series = table.frame[column]
    present = series.notna()

    if value is None and op in ("==", "!="):
        return ~present if op == "==" else present

    if op == "in_year_range":
        start, end = _year_bounds(value, column)
        if kind == ColumnKind.TIMESTAMP:
            years = series.dt.year
        elif kind == ColumnKind.NUMBER:
            years = series
        else:
            raise TypeMismatch(f"in_year_range needs a Timestamp or Number column; '{column}' is {kind.value}")
        return present & (years >= start) & (years <= end)

    if op == "contains":
        if kind != ColumnKind.TEXT:
            raise TypeMismatch(f"contains needs a Text column; '{column}' is {kind.value}")
        needle = str(value).lower()
        return present & series.map(lambda v: needle in v.lower() if isinstance(v, str) else False)

    if kind == ColumnKind.TEXT and op not in ("==", "!="):
        raise TypeMismatch(f"Operator {op} is not defined for Text column '{column}'")
    if kind == ColumnKind.BOOLEAN and op not in ("==", "!="):
        raise TypeMismatch(f"Operator {op} is not defined for Boolean column '{column}'")

    compare = _COMPARE[op]
    if kind == ColumnKind.TIMESTAMP:
        stamp, literal_resolution = coerce_literal(kind, value, column)
        resolution = _coarser(literal_resolution, table.resolutions.get(column, "date"))
        keys = _timestamp_key(series, resolution)
        return present & compare(keys, _literal_key(stamp, resolution)).fillna(False).astype(bool)

    literal = coerce_literal(kind, value, column)
    if kind == ColumnKind.NUMBER:
        return present & compare(series, literal)
    return present & series.map(lambda v: v is not None and compare(v, literal))


def apply_filter(table: Table, spec: FilterSpec) -> Table:
    mask = pd.Series(True, index=table.frame.index)
    for predicate in spec.predicates:
        mask &= predicate_mask(table, predicate).astype(bool)
    frame = table.frame[mask.to_numpy()]
    return Table(frame.reset_index(drop=True), dict(table.kinds), dict(table.resolutions))


@measure_latency("filter_rows")
def filter_rows(registry: AssetRegistry, table: str, spec, name: Optional[str] = None) -> str:
    """Keep the rows satisfying every predicate of ``spec``, in original order."""
    parent, source = load_table(registry, table)
    spec = spec if isinstance(spec, FilterSpec) else FilterSpec.parse(spec)
    result = apply_filter(source, spec)
    logger.info(f"filter_rows [{spec.describe()}]: {source.row_count} -> {result.row_count} rows")
    return register_table(registry, result, [parent], "filter", name=name)


# ------------------------------------------------------------------ join_tables
def join_frames(left: Table, right: Table, key: str, kind: str = "inner") -> Table:
    if kind not in JOIN_KINDS:
        raise InvalidParameter(f"Join kind must be one of {JOIN_KINDS}; got {kind!r}")
    left_kind, right_kind = left.kind(key), right.kind(key)
    if left_kind != right_kind:
        raise TypeMismatch(
            f"Join key '{key}' is {left_kind.value} on the left and {right_kind.value} on the right"
        )
    renamed = {c: (f"{c}_r" if c in left.kinds and c != key else c) for c in right.columns}
    right_frame = right.frame[right.frame[key].notna()].rename(columns=renamed)
    merged = pd.merge(left.frame, right_frame, on=key, how=kind, sort=False)

    kinds = dict(left.kinds)
    resolutions = dict(left.resolutions)
    for original, new in renamed.items():
        if original == key:
            continue
        kinds[new] = right.kinds[original]
        if original in right.resolutions:
            resolutions[new] = right.resolutions[original]
    return Table.from_frame(merged, kinds, resolutions)


@measure_latency("join_tables")
def join_tables(registry: AssetRegistry, left: str, right: str, key: str, kind: str = "inner",
                name: Optional[str] = None) -> str:
    """Join two tables on a shared key column; right-side name clashes get ``_r``."""
    left_guid, left_table = load_table(registry, left)
    right_guid, right_table = load_table(registry, right)
    result = join_frames(left_table, right_table, key, kind)
    logger.info(
        f"join_tables {kind} on '{key}': {left_table.row_count} x {right_table.row_count} -> {result.row_count} rows"
    )
    return register_table(registry, result, [left_guid, right_guid], "join", name=name)


# --------------------------------------------------------------------- describe
def describe_column(table: Table, column: str) -> Dict[str, Any]:
    """Descriptive statistics of one column; undefined aggregates are None."""
    kind = table.kind(column)
    series = table.frame[column]
    present = series.dropna()
    stats: Dict[str, Any] = {"column": column, "type": kind.value, "count": int(len(present)),
                             "nulls": int(len(series) - len(present))}
    if kind == ColumnKind.NUMBER:
        values = present.to_numpy(dtype=float)
        if values.size == 0:
            stats.update({"min": None, "max": None, "mean": None, "std": None})
        else:
            stats.update({
                "min": float(values.min()),
                "max": float(values.max()),
                "mean": float(values.mean()),
                "std": float(values.std(ddof=0)),
            })
    elif kind == ColumnKind.TIMESTAMP:
        stats.update({
            "min": present.min() if len(present) else None,
            "max": present.max() if len(present) else None,
            "distinct": int(present.nunique()),
        })
    elif kind == ColumnKind.BOOLEAN:
        stats.update({"true": int(sum(bool(v) for v in present)),
                      "false": int(sum(not bool(v) for v in present))})
    else:
        stats["distinct"] = int(present.nunique())
    return stats


@measure_latency("describe")
def describe(registry: AssetRegistry, table: str, column: str) -> Dict[str, Any]:
    _, source = load_table(registry, table)
    stats = describe_column(source, column)
    logger.info(f"describe '{column}': count={stats['count']} nulls={stats['nulls']}")
    return stats


# -------------------------------------------------------------- group_aggregate
def aggregate_frame(table: Table, group_key: str, value: str, agg: str) -> Table:
    if agg not in AGGREGATES:
        raise InvalidParameter(f"Aggregate must be one of {AGGREGATES}; got {agg!r}")
    table.require(group_key, value)
    if agg in ("sum", "mean"):
        table.require_number(value)
    output = f"{value}_{agg}"
    frame = table.frame[table.frame[group_key].notna()]
    grouped = frame.groupby(group_key, sort=True, dropna=True)[value]
    if agg == "count":
        result = grouped.count()
    elif agg == "sum":
        result = grouped.sum(min_count=1)
    else:
        result = grouped.mean()
    out = pd.DataFrame({group_key: result.index.tolist(), output: result.to_numpy(dtype=float)})
    kinds = {group_key: table.kinds[group_key], output: ColumnKind.NUMBER}
    resolutions = {group_key: table.resolutions[group_key]} if group_key in table.resolutions else {}
    return Table.from_frame(out, kinds, resolutions)


@measure_latency("group_aggregate")
def group_aggregate(registry: AssetRegistry, table: str, group_key: str, value: str, agg: str,
                    name: Optional[str] = None) -> str:
    """One row per distinct key (sorted ascending) with the aggregate of ``value``."""
    parent, source = load_table(registry, table)
    result = aggregate_frame(source, group_key, value, agg)
    logger.info(f"group_aggregate {agg}({value}) by {group_key}: {result.row_count} groups")
    return register_table(registry, result, [parent], "aggregate", name=name)


# --------------------------------------------------------------- change_between
def change_frame(before: Table, after: Table, key: str, value: str, fill: float = 0.0) -> Table:
    for label, table in (("before", before), ("after", after)):
        table.require(key)
        table.require_number(value)
        if table.frame[key].dropna().duplicated().any():
            raise InvalidParameter(f"Key '{key}' repeats in the {label} table; aggregate it first")
    if before.kinds[key] != after.kinds[key]:
        raise TypeMismatch(f"Key '{key}' differs in type between the two tables")
    left = before.frame[[key, value]].dropna(subset=[key]).rename(columns={value: "before"})
    right = after.frame[[key, value]].dropna(subset=[key]).rename(columns={value: "after"})
    merged = pd.merge(left, right, on=key, how="outer", sort=True)
    merged["before"] = merged["before"].fillna(fill)
    merged["after"] = merged["after"].fillna(fill)
    merged["delta"] = merged["after"] - merged["before"]
    kinds = {key: before.kinds[key], "before": ColumnKind.NUMBER, "after": ColumnKind.NUMBER,
             "delta": ColumnKind.NUMBER}
    resolutions = {key: before.resolutions[key]} if key in before.resolutions else {}
    return Table.from_frame(merged.reset_index(drop=True), kinds, resolutions)


@measure_latency("change_between")
def change_between(registry: AssetRegistry, before: str, after: str, key: str, value: str,
                   fill: float = 0.0, name: Optional[str] = None) -> str:
    """Per-key before/after/delta table over the union of keys."""
    before_guid, before_table = load_table(registry, before)
    after_guid, after_table = load_table(registry, after)
    result = change_frame(before_table, after_table, key, value, fill)
    logger.info(f"change_between on '{key}': {result.row_count} keys")
    return register_table(registry, result, [before_guid, after_guid], "change", name=name)


# --------------------------------------------------------- selection and order
@measure_latency("select_columns")
def select_columns(registry: AssetRegistry, table: str, columns: List[str],
                   name: Optional[str] = None) -> str:
    parent, source = load_table(registry, table)
    source.require(*columns)
    result = Table(source.frame[list(columns)].copy(), {c: source.kinds[c] for c in columns},
                   {c: r for c, r in source.resolutions.items() if c in columns})
    return register_table(registry, result, [parent], "select", name=name)


def sort_frame(table: Table, by: str, descending: bool = False, limit: Optional[int] = None) -> Table:
    table.require(by)
    if limit is not None and int(limit) < 1:
        raise InvalidParameter(f"limit must be positive; got {limit}")
    frame = table.frame.sort_values(by, ascending=not descending, kind="mergesort", na_position="last")
    if limit is not None:
        frame = frame.head(int(limit))
    return Table(frame.reset_index(drop=True), dict(table.kinds), dict(table.resolutions))


@measure_latency("sort_rows")
def sort_rows(registry: AssetRegistry, table: str, by: str, descending: bool = False,
              limit: Optional[int] = None, name: Optional[str] = None) -> str:
    """Stable sort on one column, optionally keeping the first ``limit`` rows."""
    parent, source = load_table(registry, table)
    result = sort_frame(source, by, descending, limit)
    return register_table(registry, result, [parent], "select", name=name)
