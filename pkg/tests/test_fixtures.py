import filecmp
import json
import os

import pytest

from src.agent.providers import read_script
from src.errors import FixtureIoError, InvalidParameter
from src.harness.fixtures import (
    CASES,
    SCRIPT_KINDS,
    brute_dbscan,
    dominant,
    generate_fixture,
    linear_percentile,
    load_questions,
    pearson,
    script_path,
    size_categories,
)

LEVEL_COUNTS = {
    "parks": {"What": 10},
    "water": {"What": 6, "Where": 4},
    "dumpsites": {"What": 4, "Where": 4, "Why": 2},
}


def _tree(root):
    return sorted(os.path.relpath(os.path.join(d, f), root) for d, _, files in os.walk(root) for f in files)


def test_same_seed_gives_identical_files(tmp_path):
    generate_fixture("parks", 7, str(tmp_path / "a"))
    generate_fixture("parks", 7, str(tmp_path / "b"))
    files = _tree(tmp_path / "a")
    assert files == _tree(tmp_path / "b")
    _, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", files, shallow=False)
    assert mismatch == [] and errors == []


def test_other_seed_changes_the_data(tmp_path):
    generate_fixture("parks", 7, str(tmp_path / "a"))
    generate_fixture("parks", 8, str(tmp_path / "b"))
    assert not filecmp.cmp(tmp_path / "a" / "parks.csv", tmp_path / "b" / "parks.csv", shallow=False)


def test_unknown_case(tmp_path):
    with pytest.raises(InvalidParameter):
        generate_fixture("harbours", 7, str(tmp_path))


@pytest.mark.parametrize("case", CASES)
def test_question_bank(fixture_root, case):
    case_dir = os.path.join(fixture_root, case)
    questions = load_questions(case_dir)
    assert [q.id for q in questions] == [f"{case}-{i:02d}" for i in range(1, 11)]
    levels = {}
    for question in questions:
        levels[question.level] = levels.get(question.level, 0) + 1
        assert question.oracle["numbers"] or question.oracle["substrings"] or question.oracle["artifacts"]
    assert levels == LEVEL_COUNTS[case]


@pytest.mark.parametrize("case", CASES)
def test_every_question_has_both_transcripts(fixture_root, case):
    case_dir = os.path.join(fixture_root, case)
    for question in load_questions(case_dir):
        for kind in SCRIPT_KINDS:
            entries = read_script(script_path(case_dir, question.id, kind))
            assert "Final Answer:" in entries[-1]
        tools = read_script(script_path(case_dir, question.id, "tools"))
        direct = read_script(script_path(case_dir, question.id, "direct"))
        assert len(tools) >= 2
        assert len(direct) == 1


@pytest.mark.parametrize("case", CASES)
def test_manifest_files_exist(fixture_root, case):
    case_dir = os.path.join(fixture_root, case)
    with open(os.path.join(case_dir, "manifest.json"), encoding="utf-8") as handle:
        manifest = json.load(handle)
    assert manifest["case"] == case
    for entry in manifest["assets"]:
        assert os.path.exists(os.path.join(case_dir, entry["file"]))
    assert os.path.exists(os.path.join(case_dir, "gazetteer.txt"))


def test_parks_case_plants_its_tables(fixture_root):
    case_dir = os.path.join(fixture_root, "parks")
    with open(os.path.join(case_dir, "parks.csv"), encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    assert lines[0] == "prop_id,name,acres,borough,constructed"
    assert len(lines) == 25
    assert os.path.exists(os.path.join(case_dir, "lulc_2010.asc"))
    assert os.path.exists(os.path.join(case_dir, "lulc_2017.asc"))


def test_missing_questions_file(tmp_path):
    with pytest.raises(FixtureIoError):
        load_questions(str(tmp_path))


def test_brute_dbscan():
    points = [(0, 0), (0, 1), (1, 0), (10, 10), (10, 11), (30, 30), (0, 2)]
    assert brute_dbscan(points, 1.5, 3) == [[0, 1, 2, 6]]
    assert brute_dbscan(points, 1.5, 2) == [[0, 1, 2, 6], [3, 4]]
    assert brute_dbscan(points, 0.5, 2) == []


def test_oracle_helpers():
    assert size_categories([1, 5, 6, 15, 16, 40]) == {"small": 2, "medium": 2, "large": 2}
    assert linear_percentile([1, 2, 3, 4, 5], 50) == 3
    assert linear_percentile([1, 2, 3, 4], 90) == pytest.approx(3.7)
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert dominant(["b", "a", "b", "a", "c"]) == "a"
