"""Tool catalogue: toolkit operations exposed to the agent by name."""
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple

import jsonschema

from src.analytics.clustering import dbscan, labeling_of, select_top_percentile, summarize_clusters
from src.analytics.correlation import correlation_band, pearson_matrix
from src.config import Settings
from src.data_processor import Table
from src.errors import InvalidParameter, UnknownTool
from src.registry import AssetRegistry, Modality
from src.toolkit import raster, tabular, vector
from src.utils.formatting import format_value
from src.utils.latency_tracker import measure_latency
from src.utils.logger import setup_logger
from src.visualization.renderers import render_choropleth, render_cluster_map, render_heatmap

logger = setup_logger(__name__)

FAMILIES = ("tabular", "vector", "raster", "analytics", "visualization")

_SCHEMA_TYPES = {
    "asset": {"type": "string", "minLength": 1},
    "string": {"type": "string"},
    "number": {"type": "number"},
    "integer": {"type": "integer"},
    "boolean": {"type": "boolean"},
    "strings": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    "filter": {"type": ["array", "object", "string"]},
    "scalar": {"type": ["string", "number", "boolean"]},
}


@dataclass(frozen=True)
class ToolParam:
    name: str
    type: str
    required: bool = True
    description: str = ""


@dataclass
class ToolContext:
    registry: AssetRegistry
    settings: Settings = field(default_factory=Settings)


@dataclass
class ToolResult:
    text: str
    outputs: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    params: Tuple[ToolParam, ...]
    family: str
    required_modalities: FrozenSet[Modality]
    executor: Callable[[ToolContext, Dict[str, Any]], ToolResult]

    def __post_init__(self):
        if not self.description.strip():
            raise InvalidParameter(f"Tool {self.name} needs a description")
        if self.family not in FAMILIES:
            raise InvalidParameter(f"Tool {self.name} has unknown family {self.family!r}")

    @property
    def schema(self) -> dict:
        return {
            "type": "object",
            "properties": {p.name: _SCHEMA_TYPES[p.type] for p in self.params},
            "required": [p.name for p in self.params if p.required],
            "additionalProperties": False,
        }

    def usage(self) -> str:
        params = ", ".join(f"{p.name}{'' if p.required else '?'}: {p.type}" for p in self.params)
        return f"{self.name}: {self.description} Parameters: {{{params}}}"


class ToolSet:
    """Ordered tools with unique names."""

    def __init__(self, tools: Iterable[ToolSpec] = ()):
        self._tools: Dict[str, ToolSpec] = {}
        for tool in tools:
            if tool.name in self._tools:
                raise InvalidParameter(f"Duplicate tool name {tool.name}")
            self._tools[tool.name] = tool

    def __len__(self):
        return len(self._tools)

    def __contains__(self, name):
        return name in self._tools

    def __iter__(self):
        return iter(self._tools.values())

    def names(self) -> List[str]:
        return list(self._tools)

    def get(self, name: str) -> ToolSpec:
        try:
            return self._tools[name]
        except KeyError:
            valid = ", ".join(self._tools) or "none"
            raise UnknownTool(f"Unknown tool '{name}'. Valid tools: {valid}")

    def describe(self) -> str:
        return "\n".join(f"> {tool.usage()}" for tool in self._tools.values())

    def restrict(self, families: Iterable[str]) -> "ToolSet":
        allowed = set(families)
        return ToolSet(t for t in self._tools.values() if t.family in allowed)


def parse_action_input(text: str) -> Dict[str, Any]:
    """Action Input as a JSON object; empty input means no parameters."""
    text = (text or "").strip()
    if not text:
        return {}
    try:
        params = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidParameter(f"Action Input must be a single-line JSON object: {e}")
    if not isinstance(params, dict):
        raise InvalidParameter(f"Action Input must be a JSON object, got {type(params).__name__}")
    return params


def validate_params(tool: ToolSpec, params: Dict[str, Any]) -> None:
    try:
        jsonschema.validate(params, tool.schema)
    except jsonschema.ValidationError as e:
        where = ".".join(str(p) for p in e.absolute_path) or "input"
        raise InvalidParameter(f"Invalid parameters for {tool.name} ({where}): {e.message}")


@measure_latency("tool_execution")
def execute_tool(tool: ToolSpec, context: ToolContext, action_input: str) -> ToolResult:
    params = parse_action_input(action_input)
    validate_params(tool, params)
    return tool.executor(context, params)


# ------------------------------------------------------------ observations
def created(context: ToolContext, guid: str, note: str = "") -> str:
    """Observation text for a derived asset, with a bounded preview of tables."""
    asset = context.registry.resolve(guid)
    label = f" as '{asset.name}'" if asset.name else ""
    lines = [f"Created {asset.filename}{label} (GUID {asset.guid}). {asset.schema_summary}"]
    if note:
        lines.append(note)
    payload = context.registry.payload(guid)
    if isinstance(payload, Table):
        lines.append(payload.to_text(context.settings.agent.observation_rows))
    return "\n".join(lines)


def _result(context: ToolContext, guid: str, note: str = "") -> ToolResult:
    return ToolResult(created(context, guid, note), (guid,))


def _stats_text(stats: Dict[str, Any]) -> str:
    parts = [f"{key} {format_value(value)}" for key, value in stats.items() if key not in ("column", "type")]
    return f"Column {stats['column']} ({stats['type']}): " + ", ".join(parts)


# --------------------------------------------------------------- executors
def _filter_rows(ctx, p):
    return _result(ctx, tabular.filter_rows(ctx.registry, p["table"], p["filter"], name=p.get("name")))


def _join_tables(ctx, p):
    guid = tabular.join_tables(ctx.registry, p["left"], p["right"], p["key"], p.get("kind", "inner"),
                               name=p.get("name"))
    return _result(ctx, guid)


def _describe(ctx, p):
    return ToolResult(_stats_text(tabular.describe(ctx.registry, p["table"], p["column"])))


def _group_aggregate(ctx, p):
    guid = tabular.group_aggregate(ctx.registry, p["table"], p["group_key"], p["value"], p["agg"],
                                   name=p.get("name"))
    return _result(ctx, guid)


def _change_between(ctx, p):
    guid = tabular.change_between(ctx.registry, p["before"], p["after"], p["key"], p["value"],
                                  fill=p.get("fill", 0.0), name=p.get("name"))
    return _result(ctx, guid)


def _select_columns(ctx, p):
    return _result(ctx, tabular.select_columns(ctx.registry, p["table"], p["columns"], name=p.get("name")))


def _sort_rows(ctx, p):
    guid = tabular.sort_rows(ctx.registry, p["table"], p["by"], p.get("descending", False), p.get("limit"),
                             name=p.get("name"))
    return _result(ctx, guid)


def _spatial_join(ctx, p):
    guid = vector.spatial_join(ctx.registry, p["points"], p["polygons"], p["tag_column"], name=p.get("name"))
    return _result(ctx, guid)


def _join_attributes(ctx, p):
    guid = vector.join_attributes(ctx.registry, p["polygons"], p["table"], p["key"], name=p.get("name"))
    return _result(ctx, guid)


def _validate_geometry(ctx, p):
    guid, report = vector.validate_geometry(ctx.registry, p["asset"], name=p.get("name"))
    note = "Repairs: " + ("; ".join(report) if report else "none")
    return _result(ctx, guid, note)


def _clip(ctx, p):
    guid = raster.clip(ctx.registry, p["raster"], p["aoi"], p.get("column"), p.get("value"), name=p.get("name"))
    return _result(ctx, guid)


def _class_proportions(ctx, p):
    return _result(ctx, raster.proportion_table(ctx.registry, p["raster"], name=p.get("name")))


def _proportion_change(ctx, p):
    guid, _ = raster.proportion_change(ctx.registry, p["before"], p["after"], name=p.get("name"))
    return _result(ctx, guid)


def _dbscan(ctx, p):
    settings = ctx.settings.analytics
    guid = dbscan(ctx.registry, p["points"], p.get("eps", settings.eps), p.get("min_pts", settings.min_pts),
                  name=p.get("name"))
    labeling = labeling_of(ctx.registry.payload(guid))
    sizes = ", ".join(f"cluster {c}: {n}" for c, n in labeling.sizes().items()) or "none"
    note = f"Found {labeling.n_clusters} clusters and {labeling.noise_count} noise points. Sizes: {sizes}"
    return _result(ctx, guid, note)


def _summarize_clusters(ctx, p):
    settings = ctx.settings.analytics
    guid = summarize_clusters(ctx.registry, p["table"], p.get("small_max", settings.small_max),
                              p.get("medium_max", settings.medium_max), p.get("group_column"),
                              name=p.get("name"))
    categories = ctx.registry.payload(guid).frame["category"].value_counts()
    note = "Categories: " + ", ".join(
        f"{name}: {int(categories.get(name, 0))}" for name in ("small", "medium", "large")
    )
    return _result(ctx, guid, note)


def _select_top_percentile(ctx, p):
    guid = select_top_percentile(ctx.registry, p["table"], p["column"],
                                 p.get("percent", ctx.settings.analytics.top_percent), name=p.get("name"))
    return _result(ctx, guid)


def _pearson_matrix(ctx, p):
    guid, matrix = pearson_matrix(ctx.registry, p["table"], p["columns"], name=p.get("name"))
    bands = "; ".join(f"{a} vs {b}: r = {format_value(r)} ({correlation_band(r)})" for a, b, r in matrix.pairs())
    return _result(ctx, guid, f"Correlations: {bands}")


def _render_cluster_map(ctx, p):
    guid = render_cluster_map(ctx.registry, p["points"], p["basemap"], p.get("label_column", "cluster"),
                              settings=ctx.settings.render, name=p.get("name"))
    return _result(ctx, guid)


def _render_choropleth(ctx, p):
    guid = render_choropleth(ctx.registry, p["polygons"], p["value_column"], settings=ctx.settings.render,
                             name=p.get("name"))
    return _result(ctx, guid)


def _render_heatmap(ctx, p):
    guid = render_heatmap(ctx.registry, p["points"], p.get("intensity_column"), p.get("basemap"),
                          settings=ctx.settings.render, name=p.get("name"))
    return _result(ctx, guid)


# --------------------------------------------------------------- catalogue
NAME = ToolParam("name", "string", False, "alias for the output")
TABLE, VECTOR, RASTER = Modality.TABLE, Modality.VECTOR, Modality.RASTER


def _spec(name, description, params, family, modalities, executor) -> ToolSpec:
    return ToolSpec(name, description, tuple(params), family, frozenset(modalities), executor)


def build_catalogue() -> ToolSet:
    """Every tool the agent can be given."""
    return ToolSet([
        _spec("filter_rows",
              "Keep the rows of a table matching every predicate. filter is a list of "
              "{column, op, value} with op one of ==, !=, <, <=, >, >=, contains, in_year_range "
              "(value [start, end]). Timestamps compare at the literal's precision.",
              [ToolParam("table", "asset"), ToolParam("filter", "filter"), NAME],
              "tabular", [TABLE], _filter_rows),
        _spec("join_tables",
              "Join two tables on a shared key column (kind inner or left); clashing right-hand "
              "columns get the suffix _r.",
              [ToolParam("left", "asset"), ToolParam("right", "asset"), ToolParam("key", "string"),
               ToolParam("kind", "string", False), NAME],
              "tabular", [TABLE], _join_tables),
        _spec("describe",
              "Descriptive statistics of one column: count, nulls, and min, max, mean, std for numbers.",
              [ToolParam("table", "asset"), ToolParam("column", "string")],
              "tabular", [TABLE], _describe),
        _spec("group_aggregate",
              "One row per distinct group key with count, sum or mean of a value column "
              "(output column <value>_<agg>).",
              [ToolParam("table", "asset"), ToolParam("group_key", "string"), ToolParam("value", "string"),
               ToolParam("agg", "string"), NAME],
              "tabular", [TABLE], _group_aggregate),
        _spec("change_between",
              "Compare a value per key across two tables: before, after and delta columns over "
              "the union of keys, missing sides filled with fill (default 0).",
              [ToolParam("before", "asset"), ToolParam("after", "asset"), ToolParam("key", "string"),
               ToolParam("value", "string"), ToolParam("fill", "number", False), NAME],
              "tabular", [TABLE], _change_between),
        _spec("select_columns",
              "Keep only the listed columns of a table.",
              [ToolParam("table", "asset"), ToolParam("columns", "strings"), NAME],
              "tabular", [TABLE], _select_columns),
        _spec("sort_rows",
              "Sort a table by one column (descending optional) and optionally keep the first limit rows.",
              [ToolParam("table", "asset"), ToolParam("by", "string"), ToolParam("descending", "boolean", False),
               ToolParam("limit", "integer", False), NAME],
              "tabular", [TABLE], _sort_rows),
        _spec("spatial_join",
              "Tag every point of a table (lon/lat columns) with tag_column of the first polygon "
              "containing it; points outside all polygons get null.",
              [ToolParam("points", "asset"), ToolParam("polygons", "asset"), ToolParam("tag_column", "string"),
               NAME],
              "vector", [TABLE, VECTOR], _spatial_join),
        _spec("join_attributes",
              "Attach table columns to polygon attributes by a shared key (left join, first match).",
              [ToolParam("polygons", "asset"), ToolParam("table", "asset"), ToolParam("key", "string"), NAME],
              "vector", [TABLE, VECTOR], _join_attributes),
        _spec("validate_geometry",
              "Check polygon rings, repair orientation and closure, drop degenerate rings; reports every repair.",
              [ToolParam("asset", "asset"), NAME],
              "vector", [VECTOR], _validate_geometry),
        _spec("clip",
              "Cut a land-cover grid to the polygons of a vector layer whose column equals value "
              "(all polygons when column is omitted); cells outside become nodata.",
              [ToolParam("raster", "asset"), ToolParam("aoi", "asset"), ToolParam("column", "string", False),
               ToolParam("value", "scalar", False), NAME],
              "raster", [RASTER, VECTOR], _clip),
        _spec("class_proportions",
              "Share of each land-cover class among the non-nodata cells of a grid, as a table.",
              [ToolParam("raster", "asset"), NAME],
              "raster", [RASTER], _class_proportions),
        _spec("proportion_change",
              "Per-class proportions of two grids with the same legend and their difference (after - before).",
              [ToolParam("before", "asset"), ToolParam("after", "asset"), NAME],
              "raster", [RASTER], _proportion_change),
        _spec("dbscan",
              "Density clustering of a point table; adds a cluster column (-1 is noise). "
              "eps is in degrees, min_pts counts the point itself.",
              [ToolParam("points", "asset"), ToolParam("eps", "number", False),
               ToolParam("min_pts", "integer", False), NAME],
              "analytics", [TABLE], _dbscan),
        _spec("summarize_clusters",
              "One row per cluster of a clustered table with its size, size category (small, medium, large) "
              "and optionally the most frequent group_column value.",
              [ToolParam("table", "asset"), ToolParam("small_max", "integer", False),
               ToolParam("medium_max", "integer", False), ToolParam("group_column", "string", False), NAME],
              "analytics", [TABLE], _summarize_clusters),
        _spec("select_top_percentile",
              "Keep the rows whose column value is at or above the (100 - percent) percentile.",
              [ToolParam("table", "asset"), ToolParam("column", "string"), ToolParam("percent", "number", False),
               NAME],
              "analytics", [TABLE], _select_top_percentile),
        _spec("pearson_matrix",
              "Pearson correlation between numeric columns of one table (pairwise complete rows), "
              "with a strength band per pair.",
              [ToolParam("table", "asset"), ToolParam("columns", "strings"), NAME],
              "analytics", [TABLE], _pearson_matrix),
        _spec("render_cluster_map",
              "Draw clustered points over a polygon basemap as an image; noise in grey.",
              [ToolParam("points", "asset"), ToolParam("basemap", "asset"),
               ToolParam("label_column", "string", False), NAME],
              "visualization", [TABLE, VECTOR], _render_cluster_map),
        _spec("render_choropleth",
              "Fill polygons by a numeric attribute on a 5-step colour ramp as an image.",
              [ToolParam("polygons", "asset"), ToolParam("value_column", "string"), NAME],
              "visualization", [VECTOR], _render_choropleth),
        _spec("render_heatmap",
              "Kernel density image of points, optionally weighted by intensity_column and drawn over a basemap.",
              [ToolParam("points", "asset"), ToolParam("intensity_column", "string", False),
               ToolParam("basemap", "asset", False), NAME],
              "visualization", [TABLE, VECTOR], _render_heatmap),
    ])


def build_toolset(families: Optional[Iterable[str]] = None) -> ToolSet:
    catalogue = build_catalogue()
    if families is None:
        return catalogue
    tools = catalogue.restrict(families)
    logger.info(f"Tool set restricted to {sorted(set(families))}: {len(tools)} tools")
    return tools
