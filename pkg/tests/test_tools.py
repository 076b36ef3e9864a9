import pytest

from src.agent.tools import (
    FAMILIES,
    ToolContext,
    build_catalogue,
    build_toolset,
    execute_tool,
    parse_action_input,
    validate_params,
)
from src.errors import InvalidParameter, UnknownColumn, UnknownTool
from src.toolkit import tabular, vector

CATALOGUE_ORDER = [
    "filter_rows", "join_tables", "describe", "group_aggregate", "change_between", "select_columns", "sort_rows",
    "spatial_join", "join_attributes", "validate_geometry",
    "clip", "class_proportions", "proportion_change",
    "dbscan", "summarize_clusters", "select_top_percentile", "pearson_matrix",
    "render_cluster_map", "render_choropleth", "render_heatmap",
]


@pytest.fixture
def context(registry, city_files):
    tabular.read_table(city_files["sites.csv"], registry, name="sites")
    vector.parse_vector(city_files["districts.geojson"], registry, name="districts")
    return ToolContext(registry)


def test_catalogue_order_and_families():
    tools = build_catalogue()
    assert tools.names() == CATALOGUE_ORDER
    assert {tool.family for tool in tools} == set(FAMILIES)
    assert build_toolset(["tabular"]).names() == CATALOGUE_ORDER[:7]
    assert build_toolset(["raster", "vector"]).names() == CATALOGUE_ORDER[7:13]
    assert len(build_toolset([])) == 0


def test_unknown_tool_lists_the_valid_ones():
    tools = build_toolset(["raster"])
    with pytest.raises(UnknownTool) as info:
        tools.get("dbscan")
    assert "Unknown tool 'dbscan'" in str(info.value)
    assert "clip, class_proportions, proportion_change" in str(info.value)


def test_describe_lists_usage_lines():
    text = build_toolset(["tabular"]).describe()
    lines = text.splitlines()
    assert len(lines) == 7
    assert all(line.startswith("> ") for line in lines)
    assert "sort_rows: " in lines[-1]
    assert "limit?: integer" in lines[-1]


@pytest.mark.parametrize("text", ["[1, 2]", "{not json", "\"table\""])
def test_action_input_must_be_an_object(text):
    with pytest.raises(InvalidParameter):
        parse_action_input(text)


def test_empty_action_input_is_no_parameters():
    assert parse_action_input("  ") == {}


@pytest.mark.parametrize("params", [
    {"table": "sites"},
    {"table": "sites", "filter": [], "bogus": 1},
    {"table": "", "filter": []},
])
def test_schema_rejects_bad_parameters(params):
    with pytest.raises(InvalidParameter):
        validate_params(build_catalogue().get("filter_rows"), params)


def test_sort_rows_limit_must_be_integer():
    with pytest.raises(InvalidParameter):
        validate_params(build_catalogue().get("sort_rows"), {"table": "t", "by": "x", "limit": "5"})


def test_filter_observation_names_the_new_file(context):
    tool = build_catalogue().get("filter_rows")
    result = execute_tool(tool, context, '{"table": "sites", "filter": [["score", ">", 4]], "name": "busy"}')
    guid = result.outputs[0]
    lines = result.text.splitlines()
    assert lines[0].startswith(f"Created {guid}.csv as 'busy' (GUID {guid}). columns: site (Text)")
    assert lines[1] == "site,lon,lat,year,score"
    assert [line.split(",")[0] for line in lines[2:]] == ["b", "c", "d"]


def test_describe_returns_text_only(context):
    result = execute_tool(build_catalogue().get("describe"), context, '{"table": "sites", "column": "score"}')
    assert result.outputs == ()
    assert result.text.startswith("Column score (Number): count 4, nulls 0, min 3, max 9, mean 6, std ")


def test_dbscan_observation_reports_sizes(context):
    result = execute_tool(build_catalogue().get("dbscan"), context, '{"points": "sites", "eps": 0.2, "min_pts": 2}')
    assert "Found 1 clusters and 2 noise points. Sizes: cluster 0: 2" in result.text


def test_spatial_join_through_the_catalogue(context):
    result = execute_tool(build_catalogue().get("spatial_join"), context,
                          '{"points": "sites", "polygons": "districts", "tag_column": "district"}')
    table = context.registry.payload(result.outputs[0])
    assert table.frame["district"].tolist() == ["West", "West", "East", None]


def test_toolkit_errors_propagate(context):
    with pytest.raises(UnknownColumn):
        execute_tool(build_catalogue().get("describe"), context, '{"table": "sites", "column": "height"}')
