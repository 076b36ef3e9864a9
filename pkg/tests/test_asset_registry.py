import json
import uuid

import pytest
from hypothesis import given, strategies as st

from src.errors import CycleDetected, InvalidExtent, InvalidParameter, SchemaTooLarge, UnknownGuid
from src.registry import AssetDescriptor, AssetRegistry, BoundingBox, Modality, TimeRange, parse_guid, render_guid
from src.registry.asset_registry import MAX_SUMMARY_CHARS


def descriptor(uri="/data/parks.csv", summary="columns: a (Number); rows: 1", **kwargs):
    return AssetDescriptor(Modality.TABLE, uri, summary, **kwargs)


def test_register_and_resolve(registry):
    guid = registry.register_asset(descriptor(name="parks", time_tag="2017"))
    asset = registry.resolve(guid)
    assert asset.guid == guid
    assert asset.filename == "parks.csv"
    assert asset.time_tag == "2017"
    assert not asset.derived
    assert guid in registry
    assert len(registry) == 1


def test_guids_are_unique_over_many_registrations(registry):
    guids = [registry.register_asset(descriptor(uri=f"/data/t{i}.csv")) for i in range(1000)]
    assert len(set(guids)) == 1000


@given(st.uuids())
def test_guid_text_round_trip(value):
    assert parse_guid(render_guid(value)) == value


@pytest.mark.parametrize("text", ["", "not-a-guid", "1234", "g" * 36])
def test_malformed_guid_text(text):
    with pytest.raises(UnknownGuid):
        parse_guid(text)


def test_empty_uri_and_summary_are_rejected(registry):
    with pytest.raises(InvalidParameter):
        registry.register_asset(descriptor(uri=""))
    with pytest.raises(InvalidParameter):
        registry.register_asset(descriptor(summary=""))


def test_summary_limit(registry):
    registry.register_asset(descriptor(summary="x" * MAX_SUMMARY_CHARS))
    with pytest.raises(SchemaTooLarge):
        registry.register_asset(descriptor(summary="x" * (MAX_SUMMARY_CHARS + 1)))


def test_inverted_extent_is_rejected():
    with pytest.raises(InvalidExtent):
        BoundingBox(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(InvalidExtent):
        BoundingBox(0.0, 2.0, 1.0, 1.0)


def test_unknown_guid(registry):
    with pytest.raises(UnknownGuid):
        registry.resolve(str(uuid.uuid4()))


def test_find_by_alias_filename_and_guid(registry):
    first = registry.register_asset(descriptor(uri="/a/parks.csv", name="parks"))
    second = registry.register_asset(descriptor(uri="/b/parks_2.csv", name="parks"))
    assert registry.find("parks").guid == second
    assert registry.find("parks.csv").guid == first
    assert registry.find(first.upper()).guid == first
    with pytest.raises(UnknownGuid):
        registry.find("missing")


def test_self_loop_and_cycle(registry):
    a = registry.register_asset(descriptor(uri="/a.csv"))
    b = registry.register_asset(descriptor(uri="/b.csv"))
    c = registry.register_asset(descriptor(uri="/c.csv"))
    with pytest.raises(CycleDetected):
        registry.link_assets(a, a, "filter")
    registry.link_assets(a, b, "filter")
    registry.link_assets(b, c, "filter")
    with pytest.raises(CycleDetected):
        registry.link_assets(c, a, "filter")
    assert registry.parents(c) == [b]
    assert registry.children(a) == [b]


def test_link_requires_registered_assets(registry):
    a = registry.register_asset(descriptor())
    with pytest.raises(UnknownGuid):
        registry.link_assets(a, str(uuid.uuid4()), "join")


def test_trace_lineage_on_a_diamond(registry):
    a = registry.register_asset(descriptor(uri="/a.csv"))
    b = registry.derive(descriptor(uri="/b.csv"), [a], "filter")
    c = registry.derive(descriptor(uri="/c.csv"), [a], "filter")
    d = registry.derive(descriptor(uri="/d.csv"), [b, c], "join")
    assert registry.trace_lineage(d) == [d, min(b, c), max(b, c), a]
    assert registry.roots(d) == [a]
    assert registry.is_grounded(d)


def test_lineage_puts_roots_last(registry):
    roots = sorted(registry.register_asset(descriptor(uri=f"/r{i}.csv")) for i in range(3))
    mid = registry.derive(descriptor(uri="/m.csv"), roots[:2], "join")
    top = registry.derive(descriptor(uri="/t.csv"), [mid, roots[2]], "join")
    order = registry.trace_lineage(top)
    assert order[:2] == [top, mid]
    assert order[2:] == roots


def test_derived_without_alignment_has_no_lineage(tmp_path):
    registry = AssetRegistry(run_dir=str(tmp_path), alignment=False)
    a = registry.register_asset(descriptor(uri="/a.csv"))
    b = registry.derive(descriptor(uri="/b.csv"), [a], "filter")
    assert registry.parents(b) == []
    assert registry.resolve(b).derived
    assert not registry.is_grounded(b)


def test_journal_replay(tmp_path):
    journal = str(tmp_path / "journal.jsonl")
    registry = AssetRegistry.open(journal)
    a = registry.register_asset(descriptor(uri="/a.csv", name="a", geo_extent=BoundingBox(0, 0, 1, 1)))
    b = registry.derive(descriptor(uri="/b.csv"), [a], "filter")

    with open(journal, encoding="utf-8") as handle:
        records = [json.loads(line) for line in handle]
    assert len(records) == 3

    restored = AssetRegistry.open(journal)
    assert restored.resolve(a) == registry.resolve(a)
    assert restored.resolve(a).geo_extent == BoundingBox(0, 0, 1, 1)
    assert restored.trace_lineage(b) == [b, a]
    assert restored.find("a").guid == a


def test_payload_is_reloaded_from_uri(registry, tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("k,v\nx,1\ny,2\n", encoding="utf-8")
    guid = registry.register_asset(AssetDescriptor(Modality.TABLE, str(path), "columns: k, v"))
    table = registry.payload(guid)
    assert table.columns == ["k", "v"]
    assert table.row_count == 2


def test_list_assets_by_modality(registry):
    registry.register_asset(descriptor(uri="/a.csv"))
    registry.register_asset(AssetDescriptor(Modality.VECTOR, "/b.geojson", "features: 1"))
    assert [a.filename for a in registry.list_assets(Modality.VECTOR)] == ["b.geojson"]
    assert len(registry.list_assets()) == 2


@pytest.mark.parametrize("text,start,end", [
    ("2017", "2017-01-01", "2017-12-31"),
    ("2020-02", "2020-02-01", "2020-02-29"),
    ("2012-05-04", "2012-05-04", "2012-05-04"),
    ("2012/2022", "2012-01-01", "2022-12-31"),
])
def test_time_range_parse(text, start, end):
    period = TimeRange.parse(text)
    assert (period.start.isoformat(), period.end.isoformat()) == (start, end)


def test_time_range_text_and_overlap():
    assert str(TimeRange.years(2016, 2021)) == "2016-2021"
    assert str(TimeRange.parse("2019")) == "2019"
    assert TimeRange.parse("2016/2018").intersects(TimeRange.parse("2018"))
    assert not TimeRange.parse("2016").intersects(TimeRange.parse("2017"))


def test_bounding_box_operations():
    box = BoundingBox(0, 0, 2, 1)
    assert box.area == 2
    assert box.center == (1.0, 0.5)
    assert box.intersects(BoundingBox(2, 1, 3, 3))
    assert not box.intersects(BoundingBox(2.5, 0, 3, 1))
    assert box.union(BoundingBox(-1, -1, 0, 0)) == BoundingBox(-1, -1, 2, 1)
    assert box.padded(0.5) == BoundingBox(-1, -0.5, 3, 1.5)
