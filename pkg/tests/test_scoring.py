import pytest

from src.controller.modality_controller import AgentAnswer
from src.errors import MissingOracle
from src.harness.fixtures import count_spec, oracle, share_spec, value_spec
from src.harness.scoring import number_matches, score_answer
from src.registry import AssetRegistry
from src.toolkit import tabular


def test_numbers_near_a_word():
    text = "There are 5 parks in Brooklyn. 12 fountains stand in them."
    assert number_matches(text, count_spec(5, near="parks"))
    assert not number_matches(text, count_spec(12, near="parks"))
    assert number_matches(text, count_spec(12))


def test_number_tolerances():
    assert number_matches("The share is 0.1234.", share_spec(0.12345))
    assert not number_matches("The value is 0.1234.", value_spec(0.12345))
    assert number_matches("Turbidity changed by -0.25.", value_spec(-0.25))
    assert not number_matches("Turbidity changed by 0.25.", value_spec(-0.25))


def test_signs_must_agree_unless_magnitude_is_allowed():
    assert not number_matches("Dumpsites correlate with population at r = 0.9687.", value_spec(-0.9687))
    assert number_matches("Dumpsites correlate with population at r = -0.9687.", value_spec(-0.9687))
    assert not number_matches("Fuhai gained 26 dumpsites.", count_spec(-26))
    assert number_matches("Fuhai had the largest decrease, losing 26 dumpsites.", count_spec(-26, magnitude=True))
    assert number_matches("Unclassified land decreased by 0.125.", share_spec(-0.125, magnitude=True))


def test_file_names_and_guids_do_not_count_as_numbers():
    assert not number_matches("See lulc_2017.asc.", value_spec(2017))


def test_passing_answer():
    answer = AgentAnswer("There are 5 parks in Brooklyn.")
    result = score_answer(answer, oracle([count_spec(5, near="parks")], substrings=["brooklyn"]), question_id="q1")
    assert result.passed
    assert result.question_id == "q1"
    assert result.diagnostics == []


def test_flags_fail_the_answer():
    answer = AgentAnswer("There are 5 parks.", ungrounded=True)
    result = score_answer(answer, oracle([count_spec(5)]))
    assert not result.passed
    assert result.diagnostics == ["Flagged: ungrounded"]


def test_missing_values_are_reported():
    answer = AgentAnswer("There are 4 parks.")
    result = score_answer(answer, oracle([count_spec(5, near="parks")], substrings=["Queens"]))
    assert result.diagnostics == ["MissingNumber: expected 5 near 'parks'", "MissingSubstring: 'Queens'"]


def test_missing_oracle():
    with pytest.raises(MissingOracle):
        score_answer(AgentAnswer("x"), None, question_id="parks-01")


def test_artifacts_need_a_registry():
    result = score_answer(AgentAnswer("ok"), oracle(artifacts=["Image"]))
    assert result.diagnostics == ["MissingArtifact: no registry to check artifacts against"]


def test_artifact_kinds_and_grounding(registry, city_files):
    tabular.read_table(city_files["sites.csv"], registry, name="sites")
    busy = tabular.filter_rows(registry, "sites", [["score", ">", 4]], name="busy")
    answer = AgentAnswer(f"See {busy}.csv.", artifacts=[busy])
    assert score_answer(answer, oracle(artifacts=["Table"]), registry).passed
    result = score_answer(answer, oracle(artifacts=["Image"]), registry)
    assert result.diagnostics == ["MissingArtifact: no Image asset in the answer"]


def test_artifacts_without_lineage_are_ungrounded(tmp_path, city_files):
    registry = AssetRegistry(run_dir=str(tmp_path / "run"), alignment=False)
    tabular.read_table(city_files["sites.csv"], registry, name="sites")
    busy = tabular.filter_rows(registry, "sites", [["score", ">", 4]], name="busy")
    result = score_answer(AgentAnswer("See the file.", artifacts=[busy]), oracle(), registry)
    assert not result.passed
    assert result.diagnostics[0].startswith(f"UngroundedArtifact: {busy}")
