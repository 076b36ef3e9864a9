from datetime import date

import pytest

from src.agent.providers import ScriptedProvider
from src.controller.gazetteer import Gazetteer, Place
from src.controller.modality_controller import (
    AnalysisLevel,
    SubResult,
    aggregate_results,
    align_demand,
    classify_level,
    extract_time,
    is_data_dependent,
    select_modalities,
    unsupported_numerals,
)
from src.errors import DanglingArtifact, EmptyQuery, EmptyResults, NoMatchingAssets, ParseError
from src.registry import BoundingBox, Modality, TimeRange, new_guid
from src.toolkit import raster, tabular, vector

from conftest import write_csv


@pytest.fixture
def gazetteer(tmp_path):
    path = tmp_path / "places.csv"
    path.write_text(
        "# name, min_lon, min_lat, max_lon, max_lat\n"
        "New York, -74.3, 40.5, -73.7, 40.9\n"
        "Brooklyn, -74.05, 40.57, -73.83, 40.74\n",
        encoding="utf-8",
    )
    return Gazetteer.load(str(path), aliases={"NYC": "New York"})


@pytest.fixture
def city(registry, city_files):
    return {
        "sites": tabular.read_table(city_files["sites.csv"], registry, name="sites", time_tag="2012"),
        "districts": vector.parse_vector(city_files["districts.geojson"], registry, name="districts"),
        "cover": raster.parse_grid(city_files["cover.asc"], registry, name="cover", time_tag="2017"),
    }


@pytest.mark.parametrize("query, level", [
    ("How many parks are there in 2022?", AnalysisLevel.WHAT),
    ("What is the proportion of water cells?", AnalysisLevel.WHAT),
    ("Make a cluster map of the dump sites", AnalysisLevel.WHERE),
    ("Where are the hotspots of illegal dumping?", AnalysisLevel.WHERE),
    ("How are the fountains distributed across boroughs?", AnalysisLevel.WHERE),
    ("Why did dumping increase near markets?", AnalysisLevel.WHY),
    ("Which street features correlate with dump site counts?", AnalysisLevel.WHY),
    ("What was the cause of the turbidity rise?", AnalysisLevel.WHY),
    ("Which district had the highest turbidity because of rainfall?", AnalysisLevel.WHAT),
    ("Tell me about parks", AnalysisLevel.WHAT),
])
def test_rule_based_levels(query, level):
    assert classify_level(query) == level


def test_language_model_only_sees_unmatched_queries():
    provider = ScriptedProvider(["Where"])
    assert classify_level("Tell me about parks", provider) == AnalysisLevel.WHERE
    assert classify_level("How many parks?", ScriptedProvider([])) == AnalysisLevel.WHAT


def test_failed_classifier_falls_back_to_what():
    assert classify_level("Tell me about parks", ScriptedProvider([])) == AnalysisLevel.WHAT


def test_levels_are_ordered():
    assert AnalysisLevel.WHAT < AnalysisLevel.WHERE < AnalysisLevel.WHY
    assert sorted([AnalysisLevel.WHY, AnalysisLevel.WHAT]) == [AnalysisLevel.WHAT, AnalysisLevel.WHY]


@pytest.mark.parametrize("query, expected", [
    ("How did parks change between 2012 and 2022?", "2012-2022"),
    ("Parks from 2015 to 2019", "2015-2019"),
    ("Fountains in 2012 and 2022", "2012-2022"),
    ("Water quality in March 2019", "2019-03-01/2019-03-31"),
    ("Complaints on 2020-06-15", "2020-06-15/2020-06-15"),
    ("Dumping in Sept. 2021 and 2022", "2021-09-01/2022-12-31"),
])
def test_extract_time(query, expected):
    assert str(extract_time(query)) == expected


@pytest.mark.parametrize("query", ["How many parks?", "The top 10 percent of 150 streets", "3.2019 acres"])
def test_no_time_in_query(query):
    assert extract_time(query) is None


def test_align_demand_notes_missing_place_and_time():
    aligned = align_demand("  How many parks?  ")
    assert aligned.raw == "How many parks?"
    assert aligned.level == AnalysisLevel.WHAT
    assert aligned.location is None and aligned.time is None
    assert aligned.notes == (
        "No place was named; data for all locations was considered.",
        "No time was named; data for all periods was considered.",
    )
    assert aligned.describe() == "level: What; location: any; time: any"


@pytest.mark.parametrize("query", ["", "   ", None])
def test_empty_queries(query):
    with pytest.raises(EmptyQuery):
        align_demand(query)


def test_align_demand_uses_gazetteer_and_defaults(gazetteer):
    aligned = align_demand("How many parks in Brooklyn, New York in 2022?", gazetteer)
    assert aligned.location.name == "Brooklyn"
    assert aligned.time == TimeRange.years(2022, 2022)
    assert aligned.notes == ()

    aligned = align_demand("How many parks?", gazetteer, default_location="nyc", default_time="2020")
    assert aligned.location.name == "New York"
    assert aligned.time == TimeRange(date(2020, 1, 1), date(2020, 12, 31))
    assert aligned.notes == (
        "No place was named; using the default location New York.",
        "No time was named; using the configured default period.",
    )


def test_gazetteer_lookup(gazetteer):
    assert len(gazetteer) == 2
    assert gazetteer.lookup("parks in NYC").name == "New York"
    assert gazetteer.lookup("a New Yorker wrote this") is None
    assert gazetteer.lookup("parks in Boston") is None
    assert gazetteer.get(" brooklyn ").bbox.as_list() == pytest.approx([-74.05, 40.57, -73.83, 40.74])


def test_missing_gazetteer_file(tmp_path):
    with pytest.raises(ParseError):
        Gazetteer.load(str(tmp_path / "absent.csv"))


def test_select_modalities_orders_by_modality(registry, city):
    selected = select_modalities(align_demand("What changed?"), registry)
    assert selected == [city["sites"], city["districts"], city["cover"]]
    kinds = [registry.resolve(g).modality for g in selected]
    assert kinds == [Modality.TABLE, Modality.VECTOR, Modality.RASTER]


def test_select_modalities_filters_by_time(registry, city):
    selected = select_modalities(align_demand("What changed in 2017?"), registry)
    assert selected == [city["districts"], city["cover"]]


def test_select_modalities_filters_by_place(registry, city):
    far = align_demand("What changed?")
    far = type(far)(far.raw, far.level, Place("Elsewhere", BoundingBox(10, 10, 11, 11)))
    with pytest.raises(NoMatchingAssets):
        select_modalities(far, registry)


def test_where_queries_skip_rasters(registry, city):
    selected = select_modalities(align_demand("Where are the sites?"), registry)
    assert selected == [city["sites"], city["districts"]]


def test_where_queries_need_a_basemap(registry, city_files):
    tabular.read_table(city_files["sites.csv"], registry, name="sites")
    with pytest.raises(NoMatchingAssets):
        select_modalities(align_demand("Where are the sites?"), registry)


def test_why_queries_need_two_tables_sharing_a_key(registry, city, tmp_path):
    aligned = align_demand("Why are some sites busier?")
    with pytest.raises(NoMatchingAssets):
        select_modalities(aligned, registry)
    path = write_csv(tmp_path / "visits.csv", ["site", "visits"], [["a", "10"], ["b", "20"]])
    visits = tabular.read_table(path, registry, name="visits")
    assert visits in select_modalities(aligned, registry)


def test_empty_registry(registry):
    with pytest.raises(NoMatchingAssets):
        select_modalities(align_demand("How many parks?"), registry)


def test_data_dependence(registry, city):
    assert is_data_dependent("How many parks?", registry)
    assert is_data_dependent("Summarize the districts for me", registry)
    assert is_data_dependent("Tell me about COVER", registry)
    assert not is_data_dependent("Hello, who are you?", registry)
    assert not is_data_dependent("Thanks for the help", registry)


def test_aggregate_results_cites_files_once(registry, city):
    sites = city["sites"]
    answer = aggregate_results(
        [SubResult("count", "There are 4 sites.", (sites,)), SubResult("again", "Still 4.", (sites,))],
        registry,
        notes=["No place was named."],
    )
    assert answer.artifacts == [sites]
    assert answer.text == "There are 4 sites.\nStill 4.\nFiles: sites.csv\nNo place was named."

    cited = aggregate_results([SubResult("count", "See sites.csv.", (sites,))], registry)
    assert cited.text == "See sites.csv."


def test_aggregate_results_errors(registry, city):
    with pytest.raises(EmptyResults):
        aggregate_results([], registry)
    with pytest.raises(DanglingArtifact):
        aggregate_results([SubResult("x", "text", (new_guid(),))], registry)


def test_unsupported_numerals():
    observations = ["count 24, mean 3.5", "Created abc.csv"]
    assert unsupported_numerals("There are 24 parks averaging 3.5 acres.", observations, "How many?") == []
    assert unsupported_numerals("There are 25 parks in 2022.", observations, "Parks in 2022?") == [25.0]
