import json
import os

import pytest

from src.config import Settings
from src.errors import InvalidParameter, MissingOracle, MissingTranscript
from src.harness.ablation import ABLATION_ORDER, ABLATIONS, get_ablation
from src.harness.evaluation import (
    EvalReport,
    QuestionOutcome,
    discover_cases,
    format_report,
    run_eval,
    run_question,
)
from src.harness.fixtures import QuestionCase, oracle

EXPECTED_ROWS = {
    "standalone": "standalone|0/20|0/8|0/2|0/30",
    "no_alignment": "no_alignment|0/20|0/8|0/2|0/30",
    "data_only": "data_only|4/20|0/8|0/2|4/30",
    "single_modality": "single_modality|16/20|0/8|0/2|16/30",
    "full": "full|20/20|8/8|2/2|30/30",
}


@pytest.fixture(scope="module")
def reports(fixture_root, tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp("eval"))
    return out_dir, run_eval(fixture_root, ABLATION_ORDER, Settings(), out_dir)


def test_ablation_grid(reports):
    _, results = reports
    assert [r.config for r in results] == list(ABLATION_ORDER)
    for report in results:
        assert report.row() == EXPECTED_ROWS[report.config], [
            (o.question_id, o.diagnostics) for o in report.outcomes if not o.passed
        ]


def test_full_config_uses_tools(reports):
    _, results = reports
    full = next(r for r in results if r.config == "full")
    assert all(o.tool_calls >= 1 for o in full.outcomes)
    standalone = next(r for r in results if r.config == "standalone")
    assert all(o.tool_calls == 0 for o in standalone.outcomes)


def test_outcomes_are_written(reports):
    out_dir, _ = reports
    with open(os.path.join(out_dir, "eval_full.jsonl"), encoding="utf-8") as handle:
        records = [json.loads(line) for line in handle]
    assert len(records) == 30
    assert {r["config"] for r in records} == {"full"}
    assert os.path.exists(os.path.join(out_dir, "full", "parks-01", "trace.jsonl"))


def test_report_table(reports):
    _, results = reports
    lines = format_report(results).splitlines()
    assert lines[0] == "config|What|Where|Why|Overall"
    assert lines[-1] == EXPECTED_ROWS["full"]


def test_parallel_workers_match(fixture_root, tmp_path):
    case_dir = os.path.join(fixture_root, "parks")
    serial = run_eval(case_dir, ["full"], out_dir=str(tmp_path / "serial"))
    parallel = run_eval(case_dir, ["full"], out_dir=str(tmp_path / "parallel"), workers=3)
    assert [o.question_id for o in parallel[0].outcomes] == [o.question_id for o in serial[0].outcomes]
    assert parallel[0].row() == serial[0].row() == "full|10/10|0/0|0/0|10/10"


def test_tally_counts_levels():
    report = EvalReport("demo", [
        QuestionOutcome("a", "What", "demo", True),
        QuestionOutcome("b", "What", "demo", False),
        QuestionOutcome("c", "Why", "demo", True),
    ])
    assert report.tally() == {"What": (1, 2), "Where": (0, 0), "Why": (1, 1), "Overall": (2, 3)}
    assert report.passed == 2
    assert report.row() == "demo|1/2|0/0|1/1|2/3"


def test_discover_cases(fixture_root, tmp_path):
    assert [os.path.basename(c) for c in discover_cases(fixture_root)] == ["dumpsites", "parks", "water"]
    parks = os.path.join(fixture_root, "parks")
    assert discover_cases(parks) == [parks]
    assert discover_cases(str(tmp_path / "nothing")) == []
    with pytest.raises(MissingOracle):
        run_eval(str(tmp_path), ["full"])


def test_question_errors(fixture_root, tmp_path):
    parks = os.path.join(fixture_root, "parks")
    missing_oracle = QuestionCase("parks-99", "parks", "What", "Basic", "How many parks?", None)
    with pytest.raises(MissingOracle):
        run_question(missing_oracle, parks, get_ablation("full"), Settings(), str(tmp_path))
    no_script = QuestionCase("parks-99", "parks", "What", "Basic", "How many parks?", oracle())
    with pytest.raises(MissingTranscript):
        run_question(no_script, parks, get_ablation("full"), Settings(), str(tmp_path))


def test_ablation_switches():
    assert get_ablation("full").script_kind == "tools"
    assert get_ablation("data_only").script_kind == "direct"
    assert get_ablation("data_only").previews
    assert not get_ablation("standalone").data_ingested
    assert not get_ablation("no_alignment").alignment
    assert get_ablation("single_modality").toolset().names()[0] == "filter_rows"
    assert len(get_ablation("standalone").toolset()) == 0
    assert set(ABLATIONS) == set(ABLATION_ORDER)
    with pytest.raises(InvalidParameter):
        get_ablation("no_tools")
