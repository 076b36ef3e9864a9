import os

import pandas as pd
import pytest

from src.data_processor import Table
from src.harness.fixtures import generate_all
from src.registry import AssetRegistry
from src.toolkit.geometry import FeatureTable, Geometry
from src.toolkit.raster import ClassRaster, write_ascii_grid
from src.toolkit.vector import write_geojson
from src.utils.latency_tracker import latency_tracker

FIXTURE_SEED = 7


@pytest.fixture
def registry(tmp_path):
    return AssetRegistry(run_dir=str(tmp_path / "run"))


@pytest.fixture(autouse=True)
def reset_latency():
    latency_tracker.reset()
    yield
    latency_tracker.reset()


@pytest.fixture(scope="session")
def fixture_root(tmp_path_factory):
    """All three synthetic cases, generated once per session."""
    root = tmp_path_factory.mktemp("fixtures")
    generate_all(FIXTURE_SEED, str(root))
    return str(root)


def write_csv(path, header, rows):
    pd.DataFrame([list(r) for r in rows], columns=list(header), dtype=object).to_csv(
        path, index=False, lineterminator="\n"
    )
    return str(path)


def square(x0, y0, size):
    return Geometry.polygon([[(x0, y0), (x0 + size, y0), (x0 + size, y0 + size), (x0, y0 + size), (x0, y0)]])


@pytest.fixture
def city_files(tmp_path):
    """A small city: a point table, two district squares and a land-cover grid."""
    data = tmp_path / "data"
    data.mkdir()
    write_csv(data / "sites.csv", ["site", "lon", "lat", "year", "score"], [
        ["a", "0.5", "0.5", "2012", "3"],
        ["b", "0.6", "0.4", "2012", "5"],
        ["c", "1.5", "0.5", "2022", "7"],
        ["d", "3.0", "3.0", "2022", "9"],
    ])
    write_csv(data / "population.csv", ["district", "population"], [["West", "100"], ["East", "250"]])
    attributes = Table.from_strings(["district"], [["West"], ["East"]])
    write_geojson(str(data / "districts.geojson"), FeatureTable([square(0, 0, 1), square(1, 0, 1)], attributes))
    cells = [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 3, 3], [3, 3, 3, 3]]
    write_ascii_grid(str(data / "cover.asc"),
                     ClassRaster(cells, 0.0, -1.0, 0.5, class_names={1: "Water", 2: "Grass", 3: "Built"}))
    return {name: str(data / name) for name in os.listdir(data)} | {"dir": str(data)}
