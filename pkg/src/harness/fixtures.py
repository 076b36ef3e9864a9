"""Synthetic evaluation cases with planted structure and brute-force oracles.

Each case directory holds the data files, ``manifest.json``, ``gazetteer.txt``,
``questions.json`` and one authored transcript per question and script kind
under ``scripts/``. Everything is a pure function of the seed.
"""
import json
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import date
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.analytics.correlation import correlation_band
from src.config import ANALYTICS_CONFIG
from src.data_processor import Table
from src.errors import FixtureIoError, HarnessError, InvalidParameter
from src.toolkit.geometry import FeatureTable, Geometry
from src.toolkit.raster import ClassRaster, write_ascii_grid
from src.toolkit.shapefile import write_shapefile
from src.toolkit.vector import write_geojson
from src.utils.formatting import format_number
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

CASES = ("parks", "water", "dumpsites")
SCRIPT_KINDS = ("tools", "direct")
QUESTIONS_FILE = "questions.json"
GAZETTEER_FILE = "gazetteer.txt"
SCRIPT_DIR = "scripts"

COUNT_TOLERANCE = 1e-6
SHARE_TOLERANCE = 1e-3
NOT_AVAILABLE = "The information is not available from the data I was given."

_CASE_OFFSETS = {"parks": 11, "water": 23, "dumpsites": 37}


@dataclass
class QuestionCase:
    id: str
    case: str
    level: str
    subtype: str
    prompt: str
    oracle: Dict[str, Any]

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: Dict[str, Any]) -> "QuestionCase":
        return cls(obj["id"], obj["case"], obj["level"], obj.get("subtype", ""), obj["prompt"],
                   obj.get("oracle"))


@dataclass
class FixtureCase:
    case: str
    directory: str
    questions: List[QuestionCase] = field(default_factory=list)


# ------------------------------------------------------------------ oracles
def count_spec(value: float, near: Optional[str] = None, magnitude: bool = False) -> Dict[str, Any]:
    spec = {"value": float(value), "kind": "count", "tolerance": COUNT_TOLERANCE}
    if near:
        spec["near"] = near
    if magnitude:
        spec["magnitude"] = True
    return spec


def value_spec(value: float) -> Dict[str, Any]:
    return {"value": float(value), "kind": "value", "tolerance": COUNT_TOLERANCE}


def share_spec(value: float, magnitude: bool = False) -> Dict[str, Any]:
    spec = {"value": float(value), "kind": "proportion", "tolerance": SHARE_TOLERANCE}
    if magnitude:
        spec["magnitude"] = True
    return spec


def oracle(numbers: Sequence[Dict[str, Any]] = (), substrings: Sequence[str] = (),
           artifacts: Sequence[str] = ()) -> Dict[str, Any]:
    return {"numbers": list(numbers), "substrings": list(substrings), "artifacts": list(artifacts)}


def brute_dbscan(points: Sequence[Tuple[float, float]], eps: float, min_pts: int) -> List[List[int]]:
    """Clusters as sorted member index lists, by exhaustive neighbour search."""
    n = len(points)
    neighbours = [
        [j for j in range(n) if math.hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]) <= eps]
        for i in range(n)
    ]
    core = [len(nb) >= min_pts for nb in neighbours]
    label = [-1] * n
    clusters: List[List[int]] = []
    for start in range(n):
        if not core[start] or label[start] >= 0:
            continue
        cluster_id = len(clusters)
        members, stack = [], [start]
        label[start] = cluster_id
        while stack:
            point = stack.pop()
            members.append(point)
            if not core[point]:
                continue
            for other in neighbours[point]:
                if label[other] < 0:
                    label[other] = cluster_id
                    stack.append(other)
        clusters.append(sorted(members))
    return clusters


def size_categories(sizes: Sequence[int]) -> Dict[str, int]:
    small_max, medium_max = ANALYTICS_CONFIG["small_max"], ANALYTICS_CONFIG["medium_max"]
    counts = {"small": 0, "medium": 0, "large": 0}
    for size in sizes:
        counts["small" if size <= small_max else "medium" if size <= medium_max else "large"] += 1
    return counts


def linear_percentile(values: Sequence[float], q: float) -> float:
    ordered = sorted(values)
    position = (len(ordered) - 1) * q / 100.0
    lower = int(math.floor(position))
    upper = min(lower + 1, len(ordered) - 1)
    return ordered[lower] + (ordered[upper] - ordered[lower]) * (position - lower)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


def mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def dominant(values: Sequence[str]) -> str:
    counts = pd.Series(list(values), dtype=object).value_counts()
    return sorted(str(v) for v, c in counts.items() if c == counts.max())[0]


# ------------------------------------------------------------ script entries
def call(thought: str, tool: str, **params) -> str:
    return f"Thought: {thought}\nAction: {tool}\nAction Input: {json.dumps(params)}"


def final(answer: str, thought: str = "I now know the final answer.") -> str:
    return f"Thought: {thought}\nFinal Answer: {answer}"


def cite(alias: str) -> str:
    return "{{file:" + alias + "}}"


fmt = format_number


def rectangle(x0: float, y0: float, x1: float, y1: float) -> Geometry:
    return Geometry.polygon([[(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]])


class CaseBuilder:
    """Collects files, manifest entries and questions for one case directory."""

    def __init__(self, case: str, out_dir: str):
        self.case = case
        self.out_dir = out_dir
        self.manifest: List[Dict[str, str]] = []
        self.questions: List[QuestionCase] = []
        self.scripts: Dict[str, Dict[str, List[str]]] = {}
        self.places: List[Tuple[str, float, float, float, float]] = []
        os.makedirs(os.path.join(out_dir, SCRIPT_DIR), exist_ok=True)

    def path(self, filename: str) -> str:
        return os.path.join(self.out_dir, filename)

    def register(self, filename: str, alias: str, time_tag: Optional[str] = None) -> None:
        entry = {"file": filename, "alias": alias}
        if time_tag:
            entry["time_tag"] = time_tag
        self.manifest.append(entry)

    def write_csv(self, filename: str, header: Sequence[str], rows: Sequence[Sequence[str]], alias: str,
                  time_tag: Optional[str] = None) -> None:
        frame = pd.DataFrame([list(r) for r in rows], columns=list(header), dtype=object)
        frame.to_csv(self.path(filename), index=False, lineterminator="\n")
        self.register(filename, alias, time_tag)

    def place(self, name: str, x0: float, y0: float, x1: float, y1: float) -> None:
        self.places.append((name, x0, y0, x1, y1))

    def ask(self, level: str, subtype: str, prompt: str, expected: Dict[str, Any], steps: Sequence[str],
            answer: str, direct: Optional[str] = None) -> QuestionCase:
        question = QuestionCase(f"{self.case}-{len(self.questions) + 1:02d}", self.case, level, subtype,
                                prompt, expected)
        self.questions.append(question)
        direct_thought = "Plan: answer directly from the question and any file contents shown."
        self.scripts[question.id] = {
            "tools": list(steps) + [final(answer)],
            "direct": [final(direct or NOT_AVAILABLE, direct_thought)],
        }
        return question

    def finish(self) -> FixtureCase:
        with open(self.path("manifest.json"), "w", encoding="utf-8") as handle:
            json.dump({"case": self.case, "assets": self.manifest}, handle, indent=2)
            handle.write("\n")
        with open(self.path(QUESTIONS_FILE), "w", encoding="utf-8") as handle:
            json.dump([q.to_json() for q in self.questions], handle, indent=2)
            handle.write("\n")
        with open(self.path(GAZETTEER_FILE), "w", encoding="utf-8") as handle:
            handle.write("# name, min_lon, min_lat, max_lon, max_lat\n")
            for name, x0, y0, x1, y1 in self.places:
                handle.write(f"{name}, {x0!r}, {y0!r}, {x1!r}, {y1!r}\n")
        for qid, kinds in self.scripts.items():
            for kind, entries in kinds.items():
                with open(script_path(self.out_dir, qid, kind), "w", encoding="utf-8") as handle:
                    handle.write("\n---\n".join(entries) + "\n")
        logger.info(f"Wrote case {self.case}: {len(self.manifest)} assets, {len(self.questions)} questions")
        return FixtureCase(self.case, self.out_dir, list(self.questions))


def script_path(case_dir: str, question_id: str, kind: str) -> str:
    return os.path.join(case_dir, SCRIPT_DIR, f"{question_id}.{kind}.txt")


# --------------------------------------------------------------------- parks
PARK_NAMES = [
    "Riverside Park", "Harbor Park", "Juniper Green", "Maple Commons", "Orchard Field", "Willow Playground",
    "Cedar Grove", "Bayview Park", "Hilltop Green", "Lantern Square", "Meadow Park", "Granite Point",
    "Heron Marsh", "Linden Square", "Foxglove Garden", "Quarry Park", "Sparrow Green", "Aspen Field",
    "Birch Hollow", "Clover Park", "Elm Triangle", "Kestrel Park", "Magnolia Lawn", "Tidewater Park",
]
BOROUGHS = ["Bronx", "Brooklyn", "Manhattan", "Queens", "Staten Island"]
LAND_COVER = {1: "Water", 2: "Tree canopy", 3: "Grass", 4: "Bare soil", 5: "Impervious", 6: "Unclassified"}
LAND_COVER_WEIGHTS = [0.08, 0.17, 0.40, 0.05, 0.10, 0.20]
GRID_ORIGIN = (-74.0, 40.7)
GRID_CELL = 0.0004
GRID_SIZE = 50
SITE_CELLS = 6


def _park_sites() -> List[Tuple[int, int]]:
    """Top-left (row, col) of each park square; 6 across, 4 down."""
    return [(2 + 12 * j, 2 + 8 * i) for j in range(4) for i in range(6)]


def _unique_dates(rng: np.random.Generator, years: Sequence[int]) -> List[str]:
    seen, dates = set(), []
    for year in years:
        while True:
            text = date(int(year), int(rng.integers(1, 13)), int(rng.integers(1, 29))).isoformat()
            if text not in seen:
                seen.add(text)
                dates.append(text)
                break
    return dates


def build_parks(rng: np.random.Generator, out_dir: str) -> FixtureCase:
    case = CaseBuilder("parks", out_dir)
    n = len(PARK_NAMES)
    ids = [f"X{101 + i}" for i in range(n)]

    boroughs = [BOROUGHS[i % len(BOROUGHS)] for i in range(10)]
    boroughs += [BOROUGHS[int(k)] for k in rng.integers(0, len(BOROUGHS), n - 10)]
    boroughs = [boroughs[int(k)] for k in rng.permutation(n)]
    acres = np.round(rng.uniform(0.5, 120.0, n), 2)
    while len(np.unique(acres)) < n:
        acres = np.round(rng.uniform(0.5, 120.0, n), 2)
    years = np.concatenate([rng.integers(1900, 1950, 8), rng.integers(1950, 2016, n - 8)])
    years = years[rng.permutation(n)]
    constructed = _unique_dates(rng, years)
    parks = [
        {"prop_id": ids[i], "name": PARK_NAMES[i], "acres": float(acres[i]), "borough": boroughs[i],
         "constructed": constructed[i]}
        for i in range(n)
    ]
    case.write_csv("parks.csv", ["prop_id", "name", "acres", "borough", "constructed"],
                   [[p["prop_id"], p["name"], f"{p['acres']:.2f}", p["borough"], p["constructed"]] for p in parks],
                   alias="parks")

    addressed = sorted(int(k) for k in rng.choice(n, 20, replace=False))
    streets = ["Oak Street", "Shore Road", "Park Avenue", "Mill Lane", "Hudson Street", "Bay Parkway"]
    address_rows = [
        [ids[i], f"{int(rng.integers(1, 400))} {streets[int(rng.integers(0, len(streets)))]}",
         str(int(rng.integers(10001, 11698)))]
        for i in addressed
    ]
    address_rows += [["X198", "7 Ferry Street", "10004"], ["X199", "51 Pier Road", "11231"]]
    address_rows = [address_rows[int(k)] for k in rng.permutation(len(address_rows))]
    case.write_csv("park_addresses.csv", ["prop_id", "address", "zipcode"], address_rows, alias="park_addresses")

    per_park = rng.integers(0, 4, n)
    early = [i for i in range(n) if int(parks[i]["constructed"][:4]) < 1950]
    if not any(per_park[i] for i in early):
        per_park[early[0]] = 2
    kinds = ["drinking", "decorative", "spray"]
    fountain_rows = []
    for i in range(n):
        for _ in range(int(per_park[i])):
            fountain_rows.append([f"F{len(fountain_rows) + 1:03d}", ids[i], kinds[int(rng.integers(0, 3))]])
    case.write_csv("fountains.csv", ["fountain_id", "prop_id", "kind"], fountain_rows, alias="fountains")

    x0, y0 = GRID_ORIGIN
    top = y0 + GRID_SIZE * GRID_CELL
    sites = _park_sites()
    squares = []
    for row, col in sites:
        left, right = round(x0 + col * GRID_CELL, 7), round(x0 + (col + SITE_CELLS) * GRID_CELL, 7)
        north, south = round(top - row * GRID_CELL, 7), round(top - (row + SITE_CELLS) * GRID_CELL, 7)
        squares.append(rectangle(left, south, right, north))
    attributes = Table.from_strings(["prop_id", "name"], [[ids[i], PARK_NAMES[i]] for i in range(n)])
    write_geojson(case.path("park_sites.geojson"), FeatureTable(squares, attributes))
    case.register("park_sites.geojson", "park_sites")

    codes = np.array(sorted(LAND_COVER))
    before = rng.choice(codes, size=(GRID_SIZE, GRID_SIZE), p=LAND_COVER_WEIGHTS)
    after = before.copy()
    draw = rng.random((GRID_SIZE, GRID_SIZE))
    unclassified = before == 6
    after[unclassified & (draw < 0.3)] = 1
    after[unclassified & (draw >= 0.3) & (draw < 0.6)] = 3
    for year, cells in (("2010", before), ("2017", after)):
        write_ascii_grid(case.path(f"lulc_{year}.asc"),
                         ClassRaster(cells, x0, y0, GRID_CELL, class_names=dict(LAND_COVER)))
        case.register(f"lulc_{year}.asc", f"lulc_{year}", time_tag=year)

    # per-cell tallies over the park squares
    def shares(cells: np.ndarray) -> Dict[int, float]:
        tally = {code: 0 for code in LAND_COVER}
        total = 0
        for row, col in sites:
            for r in range(row, row + SITE_CELLS):
                for c in range(col, col + SITE_CELLS):
                    tally[int(cells[r, c])] += 1
                    total += 1
        return {code: count / total for code, count in tally.items()}

    share_before, share_after = shares(before), shares(after)
    delta = {code: share_after[code] - share_before[code] for code in LAND_COVER}

    case.place("New York", -74.3, 40.45, -73.7, 40.95)
    case.place("Bronx", -73.94, 40.78, -73.76, 40.92)

    # look-ups
    park = parks[6]
    case.ask("What", "Basic", f"What is the name of the park with property ID {park['prop_id']}?",
             oracle(substrings=[park["name"]]),
             [call("Plan: filter the parks table by property ID and read the name.", "filter_rows",
                   table="parks", filter=[{"column": "prop_id", "op": "==", "value": park["prop_id"]}],
                   name="park_lookup")],
             f"The park with property ID {park['prop_id']} is {park['name']} ({cite('park_lookup')}).",
             f"The park with property ID {park['prop_id']} is {park['name']}.")

    park = parks[11]
    case.ask("What", "Basic", f"Which borough is {park['name']} in?",
             oracle(substrings=[park["borough"]]),
             [call("Plan: filter the parks table by name and read the borough.", "filter_rows",
                   table="parks", filter=[{"column": "name", "op": "==", "value": park["name"]}],
                   name="park_borough")],
             f"{park['name']} is in {park['borough']} ({cite('park_borough')}).",
             f"{park['name']} is in {park['borough']}.")

    bronx = [p for p in parks if p["borough"] == "Bronx"]
    largest = max(bronx, key=lambda p: p["acres"])
    case.ask("What", "Basic", "Which park in the Bronx has the largest area?",
             oracle(substrings=[largest["name"]]),
             [call("Plan: keep the Bronx parks, then sort them by acres.", "filter_rows",
                   table="parks", filter=[{"column": "borough", "op": "==", "value": "Bronx"}],
                   name="bronx_parks"),
              call("Sort by acres, largest first, and keep one row.", "sort_rows",
                   table="bronx_parks", by="acres", descending=True, limit=1, name="largest_bronx_park")],
             f"The largest park in the Bronx is {largest['name']} ({cite('largest_bronx_park')}).",
             f"The largest park in the Bronx is {largest['name']}.")

    newest = max(parks, key=lambda p: p["constructed"])
    case.ask("What", "Basic", "Which park was constructed most recently?",
             oracle(substrings=[newest["name"]]),
             [call("Plan: sort the parks by construction date, newest first.", "sort_rows",
                   table="parks", by="constructed", descending=True, limit=1, name="newest_park")],
             f"{newest['name']} was constructed most recently ({cite('newest_park')}).",
             f"{newest['name']} was constructed most recently.")

    # land cover
    clip_both = [
        call("Plan: clip both land-cover grids to the park sites, then compare class proportions.", "clip",
             raster="lulc_2010", aoi="park_sites", name="parks_2010"),
        call("Clip the 2017 grid the same way.", "clip", raster="lulc_2017", aoi="park_sites", name="parks_2017"),
        call("Compare the class proportions of the two clipped grids.", "proportion_change",
             before="parks_2010", after="parks_2017", name="park_cover_change"),
    ]
    falling = min(LAND_COVER, key=lambda code: delta[code])
    if LAND_COVER[falling] != "Unclassified":
        raise HarnessError("parks fixture lost its planted land-cover decline")
    case.ask("What", "Qualitative",
             "Which land cover class decreased the most within the park sites between 2010 and 2017?",
             oracle([share_spec(delta[falling], magnitude=True)], substrings=["Unclassified"]),
             clip_both,
             f"Unclassified land decreased the most, by {fmt(abs(delta[falling]))} of the park area "
             f"({cite('park_cover_change')}).")

    leading = max(LAND_COVER, key=lambda code: (share_before[code], -code))
    case.ask("What", "Qualitative",
             "Which land cover class covered the largest share of the park sites in 2010?",
             oracle([share_spec(share_before[leading])], substrings=[LAND_COVER[leading]]),
             [call("Plan: clip the 2010 grid to the park sites and tabulate class proportions.", "clip",
                   raster="lulc_2010", aoi="park_sites", name="parks_2010"),
              call("Tabulate the class proportions.", "class_proportions", raster="parks_2010",
                   name="park_cover_2010")],
             f"{LAND_COVER[leading]} covered the largest share of the park sites in 2010, "
             f"{fmt(share_before[leading])} of the cells ({cite('park_cover_2010')}).")

    brooklyn = sum(1 for p in parks if p["borough"] == "Brooklyn")
    case.ask("What", "Quantitative", "How many parks are in Brooklyn?",
             oracle([count_spec(brooklyn, near="parks")]),
             [call("Plan: filter the parks table to Brooklyn and count the rows.", "filter_rows",
                   table="parks", filter=[{"column": "borough", "op": "==", "value": "Brooklyn"}],
                   name="brooklyn_parks")],
             f"There are {brooklyn} parks in Brooklyn ({cite('brooklyn_parks')}).")

    early_ids = {p["prop_id"] for p in parks if int(p["constructed"][:4]) < 1950}
    early_fountains = sum(1 for row in fountain_rows if row[1] in early_ids)
    case.ask("What", "Quantitative", "How many fountains are in parks constructed before 1950?",
             oracle([count_spec(early_fountains, near="fountains")]),
             [call("Plan: join fountains to parks on prop_id, then keep parks built before 1950.", "join_tables",
                   left="fountains", right="parks", key="prop_id", name="fountain_parks"),
              call("Keep the fountains whose park was constructed before 1950.", "filter_rows",
                   table="fountain_parks", filter=[{"column": "constructed", "op": "<", "value": 1950}],
                   name="early_park_fountains")],
             f"{early_fountains} fountains are in parks constructed before 1950 ({cite('early_park_fountains')}).")

    canopy = share_after[2]
    case.ask("What", "Quantitative", "What proportion of the park sites was covered by tree canopy in 2017?",
             oracle([share_spec(canopy)], substrings=["canopy"]),
             [call("Plan: clip the 2017 grid to the park sites and tabulate class proportions.", "clip",
                   raster="lulc_2017", aoi="park_sites", name="parks_2017"),
              call("Tabulate the class proportions.", "class_proportions", raster="parks_2017",
                   name="park_cover_2017")],
             f"Tree canopy covered {fmt(canopy)} of the park sites in 2017 ({cite('park_cover_2017')}).")

    water_change = delta[1]
    if water_change <= 0:
        raise HarnessError("parks fixture lost its planted water increase")
    case.ask("What", "Quantitative",
             "How much did the proportion of water within the park sites change between 2010 and 2017?",
             oracle([share_spec(water_change), share_spec(share_after[1])]),
             clip_both,
             f"Water rose from {fmt(share_before[1])} to {fmt(share_after[1])} of the park area, a change of "
             f"{fmt(water_change)} ({cite('park_cover_change')}).")
    return case.finish()


# --------------------------------------------------------------------- water
DISTRICTS = [
    "Central and Western", "Wan Chai", "Eastern", "Southern", "Yau Tsim Mong", "Sham Shui Po",
    "Kowloon City", "Wong Tai Sin", "Kwun Tong", "Kwai Tsing", "Tsuen Wan", "Tuen Mun",
    "Yuen Long", "North", "Tai Po", "Sha Tin", "Sai Kung", "Islands",
]
WATER_BOUNDS = (113.85, 22.15, 114.35, 22.55)
WATER_YEARS = list(range(2016, 2022))
WATER_HOTSPOTS = (("Kwun Tong", 12), ("Tsuen Wan", 7), ("Sai Kung", 5))
NORMAL_STATIONS = 216
HOTSPOT_SPREAD = 0.0028
WATER_EPS = ANALYTICS_CONFIG["eps"]
MIN_PTS = ANALYTICS_CONFIG["min_pts"]


def _district_boxes() -> Dict[str, Tuple[float, float, float, float]]:
    min_lon, min_lat, max_lon, max_lat = WATER_BOUNDS
    width, height = (max_lon - min_lon) / 6, (max_lat - min_lat) / 3
    boxes = {}
    for index, name in enumerate(DISTRICTS):
        col, row = index % 6, index // 6
        boxes[name] = (round(min_lon + col * width, 6), round(min_lat + row * height, 6),
                       round(min_lon + (col + 1) * width, 6), round(min_lat + (row + 1) * height, 6))
    return boxes


def _threshold_between(high: float, low: float) -> float:
    for digits in (2, 4, 6):
        candidate = round((high + low) / 2, digits)
        if low < candidate < high:
            return candidate
    return (high + low) / 2


def build_water(rng: np.random.Generator, out_dir: str) -> FixtureCase:
    case = CaseBuilder("water", out_dir)
    boxes = _district_boxes()
    geometries = [rectangle(*boxes[name]) for name in DISTRICTS]
    attributes = Table.from_strings(["code", "district"], [[f"D{i + 1:02d}", n] for i, n in enumerate(DISTRICTS)])
    write_shapefile(case.path("districts.shp"), FeatureTable(geometries, attributes))
    case.register("districts.shp", "districts")

    centres = {}
    for name, _ in WATER_HOTSPOTS:
        x0, y0, x1, y1 = boxes[name]
        centres[name] = ((x0 + x1) / 2 + rng.uniform(-0.01, 0.01), (y0 + y1) / 2 + rng.uniform(-0.01, 0.01))

    counts = 8 + rng.multinomial(NORMAL_STATIONS - 8 * len(DISTRICTS), [1 / len(DISTRICTS)] * len(DISTRICTS))
    stations = []  # (district, lon, lat, hotspot)
    for index, name in enumerate(DISTRICTS):
        x0, y0, x1, y1 = boxes[name]
        placed = 0
        while placed < int(counts[index]):
            lon, lat = rng.uniform(x0 + 0.002, x1 - 0.002), rng.uniform(y0 + 0.002, y1 - 0.002)
            if any(math.hypot(lon - cx, lat - cy) < 0.02 for cx, cy in centres.values()):
                continue
            stations.append((name, round(lon, 6), round(lat, 6), False))
            placed += 1
        for hotspot, size in WATER_HOTSPOTS:
            if hotspot == name:
                cx, cy = centres[name]
                for _ in range(size):
                    stations.append((name, round(cx + rng.uniform(-HOTSPOT_SPREAD, HOTSPOT_SPREAD), 6),
                                     round(cy + rng.uniform(-HOTSPOT_SPREAD, HOTSPOT_SPREAD), 6), True))

    readings = {}  # (station index, year) -> turbidity
    for index, (_, _, _, hot) in enumerate(stations):
        base = rng.uniform(2.0, 12.0)
        for year in WATER_YEARS:
            if hot and year == WATER_YEARS[-1]:
                value = rng.uniform(40.0, 60.0)
            else:
                value = float(np.clip(base + rng.normal(0.0, 1.5), 0.5, 19.5))
            readings[(index, year)] = round(value, 2)

    rows = []
    for year in WATER_YEARS:
        for index, (district, lon, lat, _) in enumerate(stations):
            rows.append([f"WQ{index + 1:03d}", district, f"{lon:.6f}", f"{lat:.6f}", str(year),
                         f"{readings[(index, year)]:.2f}"])
    case.write_csv("water_quality.csv", ["station_id", "district", "lon", "lat", "year", "turbidity"], rows,
                   alias="water_quality")

    case.place("Hong Kong", 113.8, 22.1, 114.4, 22.6)
    for name in DISTRICTS:
        case.place(name, *boxes[name])

    def values(year: int, district: Optional[str] = None) -> List[float]:
        return [readings[(i, year)] for i, s in enumerate(stations) if district is None or s[0] == district]

    means_2016 = {d: mean(values(2016, d)) for d in DISTRICTS}
    means_2021 = {d: mean(values(2021, d)) for d in DISTRICTS}

    # poor-quality clusters of the last year
    last = WATER_YEARS[-1]
    cut = linear_percentile(values(last), 100.0 - ANALYTICS_CONFIG["top_percent"])
    poor = [i for i in range(len(stations)) if readings[(i, last)] >= cut]
    if sorted(poor) != [i for i, s in enumerate(stations) if s[3]]:
        raise HarnessError("water fixture percentile cut does not isolate the planted hotspots")
    clusters = brute_dbscan([(stations[i][1], stations[i][2]) for i in poor], WATER_EPS, MIN_PTS)
    sizes = [len(c) for c in clusters]
    categories = size_categories(sizes)
    biggest = max(clusters, key=len)
    biggest_district = dominant([stations[poor[k]][0] for k in biggest])

    def year_filter(year: int, alias: str, thought: str) -> str:
        return call(thought, "filter_rows", table="water_quality",
                    filter=[{"column": "year", "op": "==", "value": year}], name=alias)

    clustering = [
        year_filter(2021, "wq_2021", "Plan: keep 2021, take the top turbidity decile, cluster it."),
        call("Keep the worst tenth of stations by turbidity.", "select_top_percentile", table="wq_2021",
             column="turbidity", percent=ANALYTICS_CONFIG["top_percent"], name="poor_2021"),
        call("Cluster the poor-quality stations.", "dbscan", points="poor_2021", eps=WATER_EPS,
             min_pts=MIN_PTS, name="poor_clusters"),
    ]

    district = "Sha Tin"
    sha_tin = mean(values(2019, district))
    case.ask("What", "Quantitative", f"What was the average turbidity in {district} in 2019?",
             oracle([value_spec(sha_tin)]),
             [call("Plan: filter to the district and year, then describe turbidity.", "filter_rows",
                   table="water_quality", filter=[{"column": "district", "op": "==", "value": district},
                                                  {"column": "year", "op": "==", "value": 2019}],
                   name="sha_tin_2019"),
              call("Describe the turbidity column.", "describe", table="sha_tin_2019", column="turbidity")],
             f"The average turbidity in {district} in 2019 was {fmt(sha_tin)} ({cite('sha_tin_2019')}).")

    district = "Tuen Mun"
    tuen_mun = len(values(last, district))
    case.ask("What", "Basic", f"How many monitoring stations are there in {district}?",
             oracle([count_spec(tuen_mun, near="stations")]),
             [call("Plan: one reading per station per year, so count one year's rows for the district.",
                   "filter_rows", table="water_quality",
                   filter=[{"column": "district", "op": "==", "value": district},
                           {"column": "year", "op": "==", "value": last}],
                   name="tuen_mun_stations")],
             f"There are {tuen_mun} monitoring stations in {district} ({cite('tuen_mun_stations')}).")

    ranked = sorted(DISTRICTS, key=lambda d: means_2021[d], reverse=True)
    top = ranked[0]
    case.ask("What", "Quantitative", "Which district had the highest average turbidity in 2021?",
             oracle([value_spec(means_2021[top])], substrings=[top]),
             [year_filter(2021, "wq_2021", "Plan: keep 2021, average turbidity by district, take the top row."),
              call("Average turbidity per district.", "group_aggregate", table="wq_2021", group_key="district",
                   value="turbidity", agg="mean", name="district_means_2021"),
              call("Sort descending and keep one row.", "sort_rows", table="district_means_2021",
                   by="turbidity_mean", descending=True, limit=1, name="top_district_2021")],
             f"{top} had the highest average turbidity in 2021, at {fmt(means_2021[top])} "
             f"({cite('top_district_2021')}).")

    overall = mean(values(2016))
    case.ask("What", "Quantitative", "What was the average turbidity across all stations in 2016?",
             oracle([value_spec(overall)]),
             [year_filter(2016, "wq_2016", "Plan: keep the 2016 readings and describe turbidity."),
              call("Describe the turbidity column.", "describe", table="wq_2016", column="turbidity")],
             f"The average turbidity across all stations in 2016 was {fmt(overall)} ({cite('wq_2016')}).")

    district = WATER_HOTSPOTS[0][0]
    before, after = means_2016[district], means_2021[district]
    change = after - before
    case.ask("What", "Quantitative", f"How did the average turbidity in {district} change between 2016 and 2021?",
             oracle([value_spec(change), value_spec(after)]),
             [year_filter(2016, "wq_2016", "Plan: average turbidity by district for both years and compare."),
              year_filter(2021, "wq_2021", "Keep the 2021 readings."),
              call("Average 2016 turbidity per district.", "group_aggregate", table="wq_2016",
                   group_key="district", value="turbidity", agg="mean", name="means_2016"),
              call("Average 2021 turbidity per district.", "group_aggregate", table="wq_2021",
                   group_key="district", value="turbidity", agg="mean", name="means_2021"),
              call("Compare the two years per district.", "change_between", before="means_2016",
                   after="means_2021", key="district", value="turbidity_mean", name="turbidity_change")],
             f"Average turbidity in {district} {'rose' if change > 0 else 'fell'} from {fmt(before)} in 2016 "
             f"to {fmt(after)} in 2021, a change of {fmt(change)} ({cite('turbidity_change')}).")

    threshold = _threshold_between(means_2021[ranked[2]], means_2021[ranked[3]])
    above = ranked[:3]
    case.ask("What", "Qualitative", f"Which districts had an average turbidity above {fmt(threshold)} in 2021?",
             oracle(substrings=above),
             [year_filter(2021, "wq_2021", "Plan: average 2021 turbidity by district and keep those above the bar."),
              call("Average turbidity per district.", "group_aggregate", table="wq_2021", group_key="district",
                   value="turbidity", agg="mean", name="district_means_2021"),
              call("Keep districts above the threshold.", "filter_rows", table="district_means_2021",
                   filter=[{"column": "turbidity_mean", "op": ">", "value": threshold}], name="high_districts")],
             f"{above[0]}, {above[1]} and {above[2]} had an average turbidity above {fmt(threshold)} in 2021 "
             f"({cite('high_districts')}).")

    case.ask("Where", "Map", "Draw the distribution map of poor-quality water clusters in Hong Kong in 2021.",
             oracle([count_spec(len(clusters), near="clusters")], artifacts=["Image"]),
             clustering + [call("Draw the clusters over the district boundaries.", "render_cluster_map",
                                points="poor_clusters", basemap="districts", name="poor_cluster_map")],
             f"The map {cite('poor_cluster_map')} shows {len(clusters)} clusters of poor-quality stations "
             f"in Hong Kong in 2021 ({cite('poor_clusters')}).")

    stations_2016 = len(values(2016))
    case.ask("Where", "Map", "Draw a heat map of turbidity across Hong Kong in 2016.",
             oracle([count_spec(stations_2016)], artifacts=["Image"]),
             [year_filter(2016, "wq_2016", "Plan: keep 2016 and draw a turbidity-weighted density surface."),
              call("Render the heat map over the districts.", "render_heatmap", points="wq_2016",
                   intensity_column="turbidity", basemap="districts", name="turbidity_heatmap")],
             f"The heat map {cite('turbidity_heatmap')} weights the {stations_2016} station readings of 2016 "
             f"by turbidity.")

    case.ask("Where", "Explanation", "Where are the poor-quality water clusters of 2021 concentrated?",
             oracle([count_spec(len(biggest))], substrings=[biggest_district]),
             clustering + [
                 call("Tag each clustered station with its district polygon.", "spatial_join",
                      points="poor_clusters", polygons="districts", tag_column="district", name="poor_tagged"),
                 call("Summarize clusters with their dominant district.", "summarize_clusters",
                      table="poor_tagged", group_column="district_r", name="cluster_districts")],
             f"The largest cluster of poor-quality stations lies in {biggest_district}, with {len(biggest)} "
             f"stations ({cite('cluster_districts')}).")

    case.ask("Where", "Explanation",
             "How are the poor-quality water clusters of 2021 distributed across size categories?",
             oracle([count_spec(categories["small"]), count_spec(categories["medium"]),
                     count_spec(categories["large"])]),
             clustering + [call("Bucket the clusters by size.", "summarize_clusters", table="poor_clusters",
                                name="cluster_sizes")],
             f"In 2021 there are {categories['small']} small, {categories['medium']} medium and "
             f"{categories['large']} large clusters of poor-quality stations ({cite('cluster_sizes')}).")
    return case.finish()


# ----------------------------------------------------------------- dumpsites
STREETS = ["Xixiang", "Fuyong", "Shajing", "Songgang", "Xinqiao", "Hangcheng", "Fuhai", "Yanluo", "Xinan", "Shiyan"]
STREET_BOUNDS = (113.75, 22.5)
STREET_SIZE = (0.04, 0.1)
DUMP_YEARS = (2012, 2022)
DUMP_HOTSPOTS = {2012: (("Shajing", 22), ("Xixiang", 18), ("Fuyong", 8)), 2022: (("Shajing", 9), ("Songgang", 4))}
DUMP_SPREAD = 0.0007
DUMP_EPS = 0.003
CONFIDENCE_CUT = 0.5
FACTORS = ("population", "poi_count", "radiance")


def _street_boxes() -> Dict[str, Tuple[float, float, float, float]]:
    boxes = {}
    for index, name in enumerate(STREETS):
        col, row = index % 5, index // 5
        x0 = round(STREET_BOUNDS[0] + col * STREET_SIZE[0], 6)
        y0 = round(STREET_BOUNDS[1] + row * STREET_SIZE[1], 6)
        boxes[name] = (x0, y0, round(x0 + STREET_SIZE[0], 6), round(y0 + STREET_SIZE[1], 6))
    return boxes


def _confidence(rng: np.random.Generator) -> float:
    """Detector score of a kept detection; lower scores are discarded before writing."""
    while True:
        score = round(float(rng.uniform(0.3, 1.0)), 2)
        if score > CONFIDENCE_CUT:
            return score


def build_dumpsites(rng: np.random.Generator, out_dir: str) -> FixtureCase:
    case = CaseBuilder("dumpsites", out_dir)
    boxes = _street_boxes()
    attributes = Table.from_strings(["street", "street_id"], [[s, f"ST{i + 1:02d}"] for i, s in enumerate(STREETS)])
    write_geojson(case.path("streets.geojson"), FeatureTable([rectangle(*boxes[s]) for s in STREETS], attributes))
    case.register("streets.geojson", "streets")

    hot = {year: dict(spots) for year, spots in DUMP_HOTSPOTS.items()}
    base = rng.integers(18, 36, len(STREETS))
    kept = np.round(base * rng.uniform(0.35, 0.85, len(STREETS))).astype(int)
    while True:
        counts = {
            2012: {s: int(base[i]) + hot[2012].get(s, 0) for i, s in enumerate(STREETS)},
            2022: {s: int(kept[i]) + hot[2022].get(s, 0) for i, s in enumerate(STREETS)},
        }
        deltas = {s: counts[2022][s] - counts[2012][s] for s in STREETS}
        ordered = sorted(STREETS, key=lambda s: deltas[s])
        if deltas[ordered[0]] < deltas[ordered[1]]:
            break
        base[STREETS.index(ordered[0])] += 1

    points = {}  # year -> list of (lon, lat, street)
    for year in DUMP_YEARS:
        centres = {}
        for street in hot[year]:
            x0, y0, x1, y1 = boxes[street]
            centres[street] = ((x0 + x1) / 2 + rng.uniform(-0.008, 0.008), (y0 + y1) / 2 + rng.uniform(-0.008, 0.008))
        sites = []
        for street in STREETS:
            x0, y0, x1, y1 = boxes[street]
            for _ in range(hot[year].get(street, 0)):
                cx, cy = centres[street]
                sites.append((round(cx + rng.uniform(-DUMP_SPREAD, DUMP_SPREAD), 6),
                              round(cy + rng.uniform(-DUMP_SPREAD, DUMP_SPREAD), 6), street))
            scattered = counts[year][street] - hot[year].get(street, 0)
            while scattered > 0:
                lon, lat = rng.uniform(x0 + 0.001, x1 - 0.001), rng.uniform(y0 + 0.001, y1 - 0.001)
                if any(math.hypot(lon - cx, lat - cy) < 0.01 for cx, cy in centres.values()):
                    continue
                sites.append((round(lon, 6), round(lat, 6), street))
                scattered -= 1
        points[year] = sites
        rows = [[f"S{year}-{k + 1:04d}", f"{lon:.6f}", f"{lat:.6f}", f"{_confidence(rng):.2f}", street]
                for k, (lon, lat, street) in enumerate(sites)]
        case.write_csv(f"detections_{year}.csv", ["site_id", "lon", "lat", "confidence", "street"], rows,
                       alias=f"detections_{year}", time_tag=str(year))

    population = {s: int(round(40000 - 1500 * deltas[s] + rng.normal(0.0, 4000.0))) for s in STREETS}
    poi = {s: int(rng.integers(50, 400)) for s in STREETS}
    radiance = {s: round(float(rng.uniform(5.0, 60.0)), 2) for s in STREETS}
    case.write_csv("population.csv", ["street", "population"], [[s, str(population[s])] for s in STREETS],
                   alias="population")
    case.write_csv("poi.csv", ["street", "poi_count"], [[s, str(poi[s])] for s in STREETS], alias="poi")
    case.write_csv("night_light.csv", ["street", "radiance"], [[s, f"{radiance[s]:.2f}"] for s in STREETS],
                   alias="night_light")

    case.place("Shenzhen", 113.7, 22.4, 114.7, 22.9)
    case.place("Baoan District", 113.74, 22.49, 113.96, 22.71)

    clusters = {year: brute_dbscan([(p[0], p[1]) for p in points[year]], DUMP_EPS, MIN_PTS) for year in DUMP_YEARS}
    change_steps = [
        call("Plan: count detections per street in both years and compare.", "group_aggregate",
             table="detections_2012", group_key="street", value="site_id", agg="count", name="counts_2012"),
        call("Count the 2022 detections per street.", "group_aggregate", table="detections_2022",
             group_key="street", value="site_id", agg="count", name="counts_2022"),
        call("Compare the counts per street.", "change_between", before="counts_2012", after="counts_2022",
             key="street", value="site_id_count", name="street_change"),
    ]
    confident = [{"column": "confidence", "op": ">", "value": CONFIDENCE_CUT}]

    total = {year: len(points[year]) for year in DUMP_YEARS}
    case.ask("What", "Basic", "How many dumpsites were detected in 2012?",
             oracle([count_spec(total[2012], near="dumpsites")]),
             [call("Plan: keep confident detections of 2012 and count them.", "filter_rows",
                   table="detections_2012", filter=confident, name="sites_2012")],
             f"{total[2012]} dumpsites were detected in 2012 ({cite('sites_2012')}).")

    case.ask("What", "Quantitative", "How did the number of dumpsites change from 2012 to 2022?",
             oracle([count_spec(total[2012]), count_spec(total[2022])]),
             [call("Plan: count confident detections in each year.", "filter_rows", table="detections_2012",
                   filter=confident, name="sites_2012"),
              call("Count the 2022 detections the same way.", "filter_rows", table="detections_2022",
                   filter=confident, name="sites_2022")],
             f"The number of dumpsites fell from {total[2012]} in 2012 to {total[2022]} in 2022 "
             f"({cite('sites_2012')}, {cite('sites_2022')}).")

    worst = ordered[0]
    case.ask("What", "Quantitative", "Which street had the largest decrease in dumpsites between 2012 and 2022?",
             oracle([count_spec(deltas[worst], magnitude=True)], substrings=[worst]),
             change_steps + [call("Sort by delta, most negative first.", "sort_rows", table="street_change",
                                  by="delta", limit=1, name="biggest_decline")],
             f"{worst} had the largest decrease, losing {abs(deltas[worst])} dumpsites ({cite('biggest_decline')}).")

    street = "Fuhai"
    case.ask("What", "Basic", f"How many dumpsites were detected in {street} in 2022?",
             oracle([count_spec(counts[2022][street], near="dumpsites")]),
             [call("Plan: filter 2022 detections to the street and count them.", "filter_rows",
                   table="detections_2022",
                   filter=[{"column": "street", "op": "==", "value": street}] + confident, name="fuhai_2022")],
             f"{counts[2022][street]} dumpsites were detected in {street} in 2022 ({cite('fuhai_2022')}).")

    case.ask("Where", "Map", "Draw the distribution map of dumpsite clusters in 2022.",
             oracle([count_spec(len(clusters[2022]), near="clusters")], artifacts=["Image"]),
             [call("Plan: cluster the 2022 detections and draw them over the streets.", "dbscan",
                   points="detections_2022", eps=DUMP_EPS, min_pts=MIN_PTS, name="clusters_2022"),
              call("Draw the clusters.", "render_cluster_map", points="clusters_2022", basemap="streets",
                   name="cluster_map_2022")],
             f"The map {cite('cluster_map_2022')} shows {len(clusters[2022])} dumpsite clusters in 2022 "
             f"({cite('clusters_2022')}).")

    case.ask("Where", "Map", "Draw a choropleth map of the change in dumpsites by street between 2012 and 2022.",
             oracle([count_spec(deltas[worst], magnitude=True)], substrings=[worst], artifacts=["Image"]),
             change_steps + [
                 call("Attach the change to the street polygons.", "join_attributes", polygons="streets",
                      table="street_change", key="street", name="streets_change"),
                 call("Shade the streets by delta.", "render_choropleth", polygons="streets_change",
                      value_column="delta", name="change_map")],
             f"The choropleth {cite('change_map')} shades each street by its change in dumpsites; {worst} shows "
             f"the largest decrease ({abs(deltas[worst])}) ({cite('street_change')}).")

    def cluster_streets(year: int) -> List[Tuple[int, str]]:
        return [(len(c), dominant([points[year][k][2] for k in c])) for c in clusters[year]]

    large = sorted({s for size, s in cluster_streets(2012) if size > ANALYTICS_CONFIG["medium_max"]})
    n_large = sum(1 for size, _ in cluster_streets(2012) if size > ANALYTICS_CONFIG["medium_max"])
    case.ask("Where", "Explanation", "Where are the large dumpsite clusters located in 2012?",
             oracle([count_spec(n_large)], substrings=large),
             [call("Plan: cluster the 2012 detections and summarize clusters with their dominant street.", "dbscan",
                   points="detections_2012", eps=DUMP_EPS, min_pts=MIN_PTS, name="clusters_2012"),
              call("Summarize clusters by size and street.", "summarize_clusters", table="clusters_2012",
                   group_column="street", name="cluster_streets_2012")],
             f"The {n_large} large clusters of 2012 lie in {' and '.join(large)} ({cite('cluster_streets_2012')}).")

    categories = size_categories([len(c) for c in clusters[2022]])
    case.ask("Where", "Explanation", "How are the dumpsite clusters of 2022 distributed across size categories?",
             oracle([count_spec(categories["small"]), count_spec(categories["medium"]),
                     count_spec(categories["large"])]),
             [call("Plan: cluster the 2022 detections and bucket clusters by size.", "dbscan",
                   points="detections_2022", eps=DUMP_EPS, min_pts=MIN_PTS, name="clusters_2022"),
              call("Bucket the clusters by size.", "summarize_clusters", table="clusters_2022",
                   name="cluster_sizes_2022")],
             f"In 2022 there are {categories['small']} small, {categories['medium']} medium and "
             f"{categories['large']} large dumpsite clusters ({cite('cluster_sizes_2022')}).")

    factor_values = {"population": population, "poi_count": poi, "radiance": radiance}
    r = {f: pearson([deltas[s] for s in STREETS], [factor_values[f][s] for s in STREETS]) for f in FACTORS}
    factor_steps = change_steps + [
        call("Join population by street.", "join_tables", left="street_change", right="population",
             key="street", name="change_population"),
        call("Join POI counts by street.", "join_tables", left="change_population", right="poi", key="street",
             name="change_poi"),
        call("Join night light by street.", "join_tables", left="change_poi", right="night_light", key="street",
             name="change_factors"),
        call("Correlate the change with each factor.", "pearson_matrix", table="change_factors",
             columns=["delta", *FACTORS], name="factor_correlation"),
    ]
    case.ask("Why", "Correlation",
             "Why did dumpsites change between 2012 and 2022? Analyze the correlation of the change with "
             "population, POI count and night light by street.",
             oracle([value_spec(r[f]) for f in FACTORS], substrings=[correlation_band(r["population"])]),
             factor_steps,
             f"The change in dumpsites correlates with population at r = {fmt(r['population'])} "
             f"({correlation_band(r['population'])}), with POI count at r = {fmt(r['poi_count'])} "
             f"({correlation_band(r['poi_count'])}) and with night light at r = {fmt(r['radiance'])} "
             f"({correlation_band(r['radiance'])}) ({cite('factor_correlation')}).")

    strongest = max(FACTORS, key=lambda f: abs(r[f]))
    case.ask("Why", "Correlation",
             "Why did some streets lose more dumpsites than others? Which factor is most strongly correlated "
             "with the change?",
             oracle([value_spec(r[strongest])], substrings=[strongest]),
             factor_steps,
             f"Of the factors, {strongest} is the most strongly correlated with the change in dumpsites "
             f"(r = {fmt(r[strongest])}, {correlation_band(r[strongest])}) ({cite('factor_correlation')}).")
    return case.finish()


_BUILDERS = {"parks": build_parks, "water": build_water, "dumpsites": build_dumpsites}


def generate_fixture(case_id: str, seed: int, out_dir: str) -> FixtureCase:
    """Write one case into ``out_dir``; identical seeds give byte-identical files."""
    if case_id not in _BUILDERS:
        raise InvalidParameter(f"Unknown fixture case {case_id!r}; use one of {', '.join(CASES)}")
    rng = np.random.default_rng([int(seed), _CASE_OFFSETS[case_id]])
    try:
        os.makedirs(out_dir, exist_ok=True)
        logger.info(f"Generating fixture case {case_id} (seed {seed}) in {out_dir}")
        return _BUILDERS[case_id](rng, out_dir)
    except OSError as e:
        logger.error(f"Could not write fixture case {case_id}: {str(e)}", exc_info=True)
        raise FixtureIoError(f"Could not write fixture case {case_id} to {out_dir}: {e}")


def generate_all(seed: int, out_dir: str, cases: Sequence[str] = CASES) -> List[FixtureCase]:
    return [generate_fixture(case, seed, os.path.join(out_dir, case)) for case in cases]


def load_questions(case_dir: str) -> List[QuestionCase]:
    path = os.path.join(case_dir, QUESTIONS_FILE)
    if not os.path.exists(path):
        raise FixtureIoError(f"No {QUESTIONS_FILE} in {case_dir}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return [QuestionCase.from_json(obj) for obj in json.load(handle)]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise FixtureIoError(f"{path} is malformed: {e}")
