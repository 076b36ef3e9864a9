import math

import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from conftest import write_csv
from src.data_processor import ColumnKind, Table, infer_column
from src.errors import InvalidParameter, ParseError, RaggedRow, TypeMismatch, UnknownColumn
from src.toolkit import tabular
from src.toolkit.tabular import (
    FilterSpec,
    aggregate_frame,
    apply_filter,
    change_frame,
    describe_column,
    join_frames,
    read_csv_table,
    sort_frame,
)
from src.utils.formatting import extract_numerals, format_number


@pytest.fixture
def parks(tmp_path):
    return write_csv(tmp_path / "parks.csv", ["prop_id", "name", "acres", "borough", "constructed"], [
        ["X1", "Riverside Park", "12.5", "Bronx", "1931-05-02"],
        ["X2", "Harbor Park", "3", "Brooklyn", "1962-07-19"],
        ["X3", "Juniper Green", "40.25", "Bronx", "2004-01-30"],
        ["X4", "Maple Commons", "", "Queens", "1949-12-31"],
    ])


@pytest.fixture
def fountains(tmp_path):
    return write_csv(tmp_path / "fountains.csv", ["fountain_id", "prop_id", "kind"], [
        ["F1", "X1", "drinking"], ["F2", "X1", "spray"], ["F3", "X3", "drinking"], ["F4", "X9", "decorative"],
    ])


def kinds_of(values):
    kind, resolution, _ = infer_column(pd.Series(values, dtype=object))
    return kind, resolution


def test_column_inference():
    assert kinds_of(["2016", "2017", ""]) == (ColumnKind.TIMESTAMP, "year")
    assert kinds_of(["1", "2.5", "-3e2"]) == (ColumnKind.NUMBER, None)
    assert kinds_of(["2020-01", "2020-02"]) == (ColumnKind.TIMESTAMP, "month")
    assert kinds_of(["2020-01-31", ""]) == (ColumnKind.TIMESTAMP, "date")
    assert kinds_of(["true", "False"]) == (ColumnKind.BOOLEAN, None)
    assert kinds_of(["X1", "3"]) == (ColumnKind.TEXT, None)
    assert kinds_of(["1000", "2500"]) == (ColumnKind.NUMBER, None)
    assert kinds_of(["", ""]) == (ColumnKind.TEXT, None)
    assert kinds_of([]) == (ColumnKind.NUMBER, None)


def test_read_table_registers_a_root(registry, parks):
    guid = tabular.read_table(parks, registry, name="parks")
    asset = registry.resolve(guid)
    assert not asset.derived
    assert asset.time_tag == "1931/2004"
    assert "acres (Number)" in asset.schema_summary
    assert "constructed (Timestamp[date])" in asset.schema_summary
    table = registry.payload(guid)
    assert table.row_count == 4
    assert math.isnan(table.frame["acres"][3])


@pytest.mark.parametrize("text, line", [
    ("a,b\n1,2\n3\n", 3),
    ("a,b,c\n1,2,3\n4,5\n6,7,8\n", 3),
    ("a,b\n1,2\n\n3,4\n5\n", 5),
])
def test_ragged_row_reports_line(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(RaggedRow) as info:
        read_csv_table(str(path))
    assert info.value.line == line


def test_header_errors(tmp_path):
    duplicate = tmp_path / "dup.csv"
    duplicate.write_text("a,a\n1,2\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_csv_table(str(duplicate))
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ParseError):
        read_csv_table(str(empty))


def test_filter_by_text_number_and_date(registry, parks):
    parks_guid = tabular.read_table(parks, registry, name="parks")
    guid = tabular.filter_rows(registry, "parks", [{"column": "borough", "op": "==", "value": "Bronx"}],
                               name="bronx")
    bronx = registry.payload(guid)
    assert bronx.frame["name"].tolist() == ["Riverside Park", "Juniper Green"]
    assert registry.parents(guid) == [parks_guid]

    big = apply_filter(registry.payload(parks_guid), FilterSpec.parse('[["acres", ">=", 12.5]]'))
    assert big.frame["prop_id"].tolist() == ["X1", "X3"]

    early = apply_filter(registry.payload(parks_guid),
                         FilterSpec.parse([{"column": "constructed", "op": "<", "value": 1950}]))
    assert early.frame["prop_id"].tolist() == ["X1", "X4"]

    same_year = apply_filter(registry.payload(parks_guid),
                             FilterSpec.parse({"column": "constructed", "op": "==", "value": "1962"}))
    assert same_year.frame["prop_id"].tolist() == ["X2"]


def test_filter_contains_and_year_range(registry, parks):
    table = read_csv_table(parks)
    named = apply_filter(table, FilterSpec.parse([["name", "contains", "park"]]))
    assert named.frame["prop_id"].tolist() == ["X1", "X2"]
    ranged = apply_filter(table, FilterSpec.parse([["constructed", "in_year_range", [1940, 1970]]]))
    assert ranged.frame["prop_id"].tolist() == ["X2", "X4"]


def test_null_cells_never_match(parks):
    table = read_csv_table(parks)
    assert apply_filter(table, FilterSpec.parse([["acres", "<", 1000]])).row_count == 3
    assert apply_filter(table, FilterSpec.parse([["acres", "==", None]])).frame["prop_id"].tolist() == ["X4"]


def test_filter_type_errors(parks):
    table = read_csv_table(parks)
    with pytest.raises(TypeMismatch):
        apply_filter(table, FilterSpec.parse([["acres", "==", "large"]]))
    with pytest.raises(TypeMismatch):
        apply_filter(table, FilterSpec.parse([["name", "<", "M"]]))
    with pytest.raises(UnknownColumn):
        apply_filter(table, FilterSpec.parse([["area", ">", 1]]))
    with pytest.raises(InvalidParameter):
        FilterSpec.parse([["acres", "~", 1]])
    with pytest.raises(InvalidParameter):
        FilterSpec.parse("not json")


def test_inner_join_matches_nested_loop(parks, fountains):
    left, right = read_csv_table(fountains), read_csv_table(parks)
    joined = join_frames(left, right, "prop_id")
    expected = [
        (f["fountain_id"], p["name"])
        for f in left.records() for p in right.records() if f["prop_id"] == p["prop_id"]
    ]
    assert list(zip(joined.frame["fountain_id"], joined.frame["name"])) == expected
    assert joined.kinds["acres"] == ColumnKind.NUMBER


def test_left_join_and_suffix(parks):
    table = read_csv_table(parks)
    extra = Table.from_strings(["prop_id", "name"], [["X1", "Alias One"]])
    joined = join_frames(table, extra, "prop_id", kind="left")
    assert joined.row_count == 4
    assert joined.frame["name_r"].tolist()[:2] == ["Alias One", None]


def test_join_key_kind_mismatch():
    left = Table.from_strings(["k", "v"], [["1", "a"]])
    right = Table.from_strings(["k", "w"], [["x", "b"]])
    with pytest.raises(TypeMismatch):
        join_frames(left, right, "k")


def test_describe_column(parks):
    stats = describe_column(read_csv_table(parks), "acres")
    assert stats["count"] == 3
    assert stats["nulls"] == 1
    assert stats["min"] == 3.0 and stats["max"] == 40.25
    assert stats["mean"] == pytest.approx((12.5 + 3 + 40.25) / 3)
    values = [12.5, 3.0, 40.25]
    mean = sum(values) / 3
    assert stats["std"] == pytest.approx(math.sqrt(sum((v - mean) ** 2 for v in values) / 3))


def test_group_aggregate_sorted_keys(parks):
    table = read_csv_table(parks)
    counts = aggregate_frame(table, "borough", "prop_id", "count")
    assert counts.frame["borough"].tolist() == ["Bronx", "Brooklyn", "Queens"]
    assert counts.frame["prop_id_count"].tolist() == [2.0, 1.0, 1.0]
    sums = aggregate_frame(table, "borough", "acres", "sum")
    assert sums.frame["acres_sum"].tolist()[0] == 52.75
    assert math.isnan(sums.frame["acres_sum"].tolist()[2])
    with pytest.raises(TypeMismatch):
        aggregate_frame(table, "borough", "name", "mean")


def test_change_between_covers_key_union(registry, tmp_path):
    write_csv(tmp_path / "before.csv", ["street", "n"], [["A", "5"], ["B", "2"]])
    write_csv(tmp_path / "after.csv", ["street", "n"], [["B", "7"], ["C", "1"]])
    tabular.read_table(str(tmp_path / "before.csv"), registry, name="before")
    tabular.read_table(str(tmp_path / "after.csv"), registry, name="after")
    guid = tabular.change_between(registry, "before", "after", "street", "n", name="change")
    change = registry.payload(guid)
    assert change.records() == [
        {"street": "A", "before": 5.0, "after": 0.0, "delta": -5.0},
        {"street": "B", "before": 2.0, "after": 7.0, "delta": 5.0},
        {"street": "C", "before": 0.0, "after": 1.0, "delta": 1.0},
    ]
    assert len(registry.parents(guid)) == 2


def test_change_between_rejects_repeated_keys():
    before = Table.from_strings(["k", "n"], [["A", "1"], ["A", "2"]])
    after = Table.from_strings(["k", "n"], [["A", "1"]])
    with pytest.raises(InvalidParameter):
        change_frame(before, after, "k", "n")


def test_sort_is_stable_and_limited(parks):
    table = read_csv_table(parks)
    ordered = sort_frame(table, "borough")
    assert ordered.frame["prop_id"].tolist() == ["X1", "X3", "X2", "X4"]
    top = sort_frame(table, "acres", descending=True, limit=1)
    assert top.frame["name"].tolist() == ["Juniper Green"]
    with pytest.raises(InvalidParameter):
        sort_frame(table, "acres", limit=0)


def test_select_columns(registry, parks):
    tabular.read_table(parks, registry, name="parks")
    guid = tabular.select_columns(registry, "parks", ["name", "acres"])
    assert registry.payload(guid).columns == ["name", "acres"]
    with pytest.raises(UnknownColumn):
        tabular.select_columns(registry, "parks", ["nope"])


def test_derived_table_is_written_and_rereadable(registry, parks):
    tabular.read_table(parks, registry, name="parks")
    guid = tabular.filter_rows(registry, "parks", [["acres", ">", 10]])
    asset = registry.resolve(guid)
    assert asset.filename == f"{guid}.csv"
    reread = read_csv_table(asset.uri)
    assert reread.frame["acres"].tolist() == [12.5, 40.25]


def test_to_text_truncates(parks):
    text = read_csv_table(parks).to_text(max_rows=2)
    assert text.splitlines()[0] == "prop_id,name,acres,borough,constructed"
    assert text.splitlines()[-1] == "... (2 more rows)"


@settings(max_examples=60)
@given(st.floats(min_value=-1e9, max_value=1e9, allow_nan=False, allow_infinity=False))
def test_formatted_numbers_read_back_close(value):
    text = format_number(value)
    assert "e" not in text
    parsed = extract_numerals(f"value {text} here")
    assert len(parsed) == 1
    assert parsed[0] == pytest.approx(value, rel=1e-7, abs=1e-9)
