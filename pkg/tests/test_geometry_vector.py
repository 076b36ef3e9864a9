import json
import shutil

import pytest
from hypothesis import given, strategies as st

from conftest import square
from src.data_processor import Table
from src.errors import (
    AlignmentDisabled,
    AttributeCountMismatch,
    CrsMismatch,
    InvalidParameter,
    MalformedHeader,
    UnknownColumn,
)
from src.registry import AssetRegistry
from src.toolkit import tabular, vector
from src.toolkit.geometry import (
    FeatureTable,
    Geometry,
    GeometryKind,
    point_in_polygon,
    points_in_polygon,
    require_same_crs,
    signed_area,
)
from src.toolkit.shapefile import read_shapefile, write_shapefile

# A U shape with a square hole in its lower-left corner; every vertex is on the integer grid
U_EXTERIOR = [(0, 0), (12, 0), (12, 12), (8, 12), (8, 4), (4, 4), (4, 12), (0, 12), (0, 0)]
U_HOLE = [(1, 1), (1, 3), (3, 3), (3, 1), (1, 1)]


def winding_number(point, ring):
    x, y = point
    wn = 0
    for (ax, ay), (bx, by) in zip(ring[:-1], ring[1:]):
        side = (bx - ax) * (y - ay) - (x - ax) * (by - ay)
        if ay <= y:
            if by > y and side > 0:
                wn += 1
        elif by <= y and side < 0:
            wn -= 1
    return wn


def inside_by_winding(point, rings):
    return winding_number(point, rings[0]) != 0 and not any(winding_number(point, r) != 0 for r in rings[1:])


@given(st.lists(st.tuples(st.integers(-2, 13), st.integers(-2, 13)), min_size=1, max_size=50))
def test_containment_agrees_with_winding_number(cells):
    # half-integer points never touch an edge of the grid-aligned polygon
    points = [(i + 0.5, j + 0.5) for i, j in cells]
    rings = [U_EXTERIOR, U_HOLE]
    mask = points_in_polygon([p[0] for p in points], [p[1] for p in points], rings)
    assert mask.tolist() == [inside_by_winding(p, rings) for p in points]


def test_boundary_counts_as_inside():
    assert point_in_polygon((0, 5), [U_EXTERIOR])
    assert point_in_polygon((12, 12), [U_EXTERIOR])
    assert point_in_polygon((2, 3), [U_EXTERIOR, U_HOLE])
    assert not point_in_polygon((6, 8), [U_EXTERIOR])
    assert not point_in_polygon((2, 2), [U_EXTERIOR, U_HOLE])


def test_signed_area_orientation():
    assert signed_area([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]) == 1.0
    assert signed_area([(0, 0), (0, 1), (1, 1), (1, 0), (0, 0)]) == -1.0


def test_geometry_json_and_bbox():
    shape = Geometry.from_json({"type": "MultiPolygon", "coordinates": [
        [[[0, 0], [1, 0], [1, 1], [0, 0]]],
        [[[3, 3], [4, 3], [4, 5], [3, 3]]],
    ]})
    assert shape.kind == GeometryKind.MULTIPOLYGON
    assert len(shape.polygons()) == 2
    assert shape.bbox.as_list() == [0.0, 0.0, 4.0, 5.0]
    assert Geometry.from_json(shape.to_json()) == shape
    assert shape.translated(1, 1).bbox.as_list() == [1.0, 1.0, 5.0, 6.0]


def test_feature_table_needs_one_row_per_geometry():
    with pytest.raises(InvalidParameter):
        FeatureTable([square(0, 0, 1)], Table.from_strings(["k"], [["a"], ["b"]]))


def districts():
    return FeatureTable([square(0, 0, 2), square(1, 1, 2)],
                        Table.from_strings(["district"], [["First"], ["Second"]]))


def test_first_polygon_in_file_order_wins():
    points = Table.from_strings(["lon", "lat"], [["1.5", "1.5"], ["2.5", "2.5"], ["9", "9"]])
    tagged = vector.tag_points(points, ("lon", "lat"), districts(), "district")
    assert tagged.frame["district"].tolist() == ["First", "Second", None]


def test_tag_column_clash_gets_suffix():
    points = Table.from_strings(["district", "lon", "lat"], [["old", "0.5", "0.5"]])
    tagged = vector.tag_points(points, ("lon", "lat"), districts(), "district")
    assert tagged.frame["district_r"].tolist() == ["First"]
    assert tagged.frame["district"].tolist() == ["old"]


def test_spatial_join_matches_brute_force(registry, city_files):
    tabular.read_table(city_files["sites.csv"], registry, name="sites")
    vector.parse_vector(city_files["districts.geojson"], registry, name="districts")
    guid = vector.spatial_join(registry, "sites", "districts", "district", name="tagged")
    tagged = registry.payload(guid)

    features = vector.read_geojson(city_files["districts.geojson"])
    names = features.attributes.frame["district"].tolist()
    expected = []
    for lon, lat in zip(tagged.frame["lon"], tagged.frame["lat"]):
        owner = next((n for g, n in zip(features.geometries, names)
                      if point_in_polygon((lon, lat), g.polygons()[0])), None)
        expected.append(owner)
    assert tagged.frame["district"].tolist() == expected == ["West", "West", "East", None]
    assert len(registry.parents(guid)) == 2


def test_spatial_join_errors(registry, city_files):
    tabular.read_table(city_files["sites.csv"], registry, name="sites")
    vector.parse_vector(city_files["districts.geojson"], registry, name="districts")
    with pytest.raises(UnknownColumn):
        vector.spatial_join(registry, "sites", "districts", "borough")


def test_spatial_join_needs_alignment(tmp_path, city_files):
    registry = AssetRegistry(run_dir=str(tmp_path / "run"), alignment=False)
    tabular.read_table(city_files["sites.csv"], registry, name="sites")
    vector.parse_vector(city_files["districts.geojson"], registry, name="districts")
    with pytest.raises(AlignmentDisabled):
        vector.spatial_join(registry, "sites", "districts", "district")


def test_crs_mismatch(registry, tmp_path, city_files):
    projected = FeatureTable([Geometry.point(0.5, 0.5)], Table.from_strings(["id"], [["p1"]]),
                             crs_id="EPSG:3857")
    path = str(tmp_path / "projected.geojson")
    vector.write_geojson(path, projected)
    vector.parse_vector(path, registry, name="projected")
    vector.parse_vector(city_files["districts.geojson"], registry, name="districts")
    with pytest.raises(CrsMismatch):
        vector.spatial_join(registry, "projected", "districts", "district")
    with pytest.raises(CrsMismatch):
        require_same_crs(projected, vector.read_geojson(city_files["districts.geojson"]))


def test_validate_repairs_and_drops(registry, tmp_path):
    open_clockwise = Geometry.polygon([[(0, 0), (0, 1), (1, 1), (1, 0)]])
    sliver = Geometry.polygon([[(0, 0), (1, 1), (0, 0)]])
    features = FeatureTable([open_clockwise, sliver], Table.from_strings(["id"], [["ok"], ["bad"]]))
    path = str(tmp_path / "shapes.geojson")
    vector.write_geojson(path, features)
    vector.parse_vector(path, registry, name="shapes")

    guid, report = vector.validate_geometry(registry, "shapes", name="clean")
    assert report[0] == "feature 0 part 0 ring 0: closed ring"
    assert report[1] == "feature 0 part 0 ring 0: reversed exterior ring winding"
    assert report[2].startswith("DegenerateRing:")
    assert report[2].endswith("feature 1 dropped")

    repaired = registry.payload(guid)
    assert len(repaired) == 1
    assert repaired.attributes.frame["id"].tolist() == ["ok"]
    ring = repaired.geometries[0].polygons()[0][0]
    assert ring[0] == ring[-1]
    assert signed_area(ring) > 0


def test_join_attributes(registry, city_files):
    vector.parse_vector(city_files["districts.geojson"], registry, name="districts")
    tabular.read_table(city_files["population.csv"], registry, name="population")
    guid = vector.join_attributes(registry, "districts", "population", "district")
    joined = registry.payload(guid)
    assert joined.attributes.frame["population"].tolist() == [100.0, 250.0]
    with open(registry.resolve(guid).uri, encoding="utf-8") as handle:
        document = json.load(handle)
    assert document["features"][1]["properties"] == {"district": "East", "population": 250}


def test_area_of_interest(city_files):
    features = vector.read_geojson(city_files["districts.geojson"])
    assert vector.area_of_interest(features, "district", "West") == square(0, 0, 1)
    both = vector.area_of_interest(features)
    assert both.kind == GeometryKind.MULTIPOLYGON
    assert both.bbox.as_list() == [0.0, 0.0, 2.0, 1.0]
    with pytest.raises(InvalidParameter):
        vector.area_of_interest(features, "district", "North")


def test_shapefile_polygons_survive_a_write(tmp_path):
    attributes = Table.from_strings(["district", "pop"], [["West", "100"], ["East", "250.5"]])
    features = FeatureTable([square(0, 0, 1), square(1, 0, 1)], attributes)
    paths = write_shapefile(str(tmp_path / "districts.shp"), features)
    assert [p.rsplit(".", 1)[1] for p in paths] == ["shp", "shx", "dbf"]

    restored = read_shapefile(paths[0])
    assert restored.source_kind == "shapefile"
    assert restored.attributes.frame["district"].tolist() == ["West", "East"]
    assert restored.attributes.frame["pop"].tolist() == [100.0, 250.5]
    for original, read_back in zip(features.geometries, restored.geometries):
        assert read_back.kind == GeometryKind.POLYGON
        assert set(read_back.all_coordinates()) == set(original.all_coordinates())
        assert read_back.bbox == original.bbox


def test_shapefile_points(tmp_path):
    features = FeatureTable([Geometry.point(1.25, 2.5), Geometry.point(-3, 4)],
                            Table.from_strings(["name"], [["a"], ["b"]]))
    paths = write_shapefile(str(tmp_path / "pts.shp"), features)
    restored = read_shapefile(paths[0])
    assert restored.geometries == features.geometries


def test_shapefile_errors(tmp_path):
    long_name = FeatureTable([Geometry.point(0, 0)], Table.from_strings(["much_too_long"], [["x"]]))
    with pytest.raises(MalformedHeader):
        write_shapefile(str(tmp_path / "long.shp"), long_name)

    two = FeatureTable([Geometry.point(0, 0), Geometry.point(1, 1)], Table.from_strings(["k"], [["a"], ["b"]]))
    one = FeatureTable([Geometry.point(0, 0)], Table.from_strings(["k"], [["a"]]))
    two_paths = write_shapefile(str(tmp_path / "two.shp"), two)
    one_paths = write_shapefile(str(tmp_path / "one.shp"), one)
    shutil.copy(one_paths[2], two_paths[2])
    with pytest.raises(AttributeCountMismatch):
        read_shapefile(two_paths[0])

    (tmp_path / "one.dbf").unlink()
    with pytest.raises(MalformedHeader):
        read_shapefile(one_paths[0])

    bogus = tmp_path / "bogus.shp"
    bogus.write_bytes(b"\x00" * 20)
    with pytest.raises(MalformedHeader):
        read_shapefile(str(bogus))
