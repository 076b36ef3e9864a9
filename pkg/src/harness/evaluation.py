"""Run fixture questions under ablation configurations and tally the scores."""
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from src.agent.loop import run_agent
from src.agent.memory import Transcript
from src.agent.providers import ScriptedProvider, build_provider
from src.agent.trace import TraceWriter
from src.config import Settings
from src.controller.gazetteer import Gazetteer
from src.data_loader import ingest_manifest
from src.errors import MissingOracle, MissingTranscript
from src.harness.ablation import ABLATION_ORDER, AblationConfig, get_ablation
from src.harness.fixtures import GAZETTEER_FILE, QUESTIONS_FILE, QuestionCase, load_questions, script_path
from src.harness.scoring import score_answer
from src.registry import AssetRegistry
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

LEVELS = ("What", "Where", "Why")
REPORT_COLUMNS = ("config",) + LEVELS + ("Overall",)
DELIMITER = "|"


@dataclass
class QuestionOutcome:
    question_id: str
    level: str
    config: str
    passed: bool
    diagnostics: List[str] = field(default_factory=list)
    answer: str = ""
    tool_calls: int = 0


@dataclass
class EvalReport:
    config: str
    outcomes: List[QuestionOutcome] = field(default_factory=list)

    def tally(self) -> Dict[str, Tuple[int, int]]:
        """(passed, total) per level and overall."""
        counts = {level: (0, 0) for level in LEVELS + ("Overall",)}
        for outcome in self.outcomes:
            for key in (outcome.level, "Overall"):
                passed, total = counts.get(key, (0, 0))
                counts[key] = (passed + int(outcome.passed), total + 1)
        return counts

    @property
    def passed(self) -> int:
        return self.tally()["Overall"][0]

    def row(self) -> str:
        tally = self.tally()
        cells = [self.config] + [f"{tally[k][0]}/{tally[k][1]}" for k in LEVELS + ("Overall",)]
        return DELIMITER.join(cells)


def format_report(reports: Sequence[EvalReport]) -> str:
    return "\n".join([DELIMITER.join(REPORT_COLUMNS)] + [r.row() for r in reports])


def discover_cases(fixtures_dir: str) -> List[str]:
    """Case directories under ``fixtures_dir`` (or the directory itself when it is one)."""
    if os.path.exists(os.path.join(fixtures_dir, QUESTIONS_FILE)):
        return [fixtures_dir]
    if not os.path.isdir(fixtures_dir):
        return []
    return [
        os.path.join(fixtures_dir, entry) for entry in sorted(os.listdir(fixtures_dir))
        if os.path.exists(os.path.join(fixtures_dir, entry, QUESTIONS_FILE))
    ]


def run_question(question: QuestionCase, case_dir: str, ablation: AblationConfig, settings: Settings,
                 run_root: str, provider_kind: str = "scripted") -> QuestionOutcome:
    """Answer one question on a fresh registry and score it."""
    if question.oracle is None:
        raise MissingOracle(f"Question {question.id} has no oracle")
    run_dir = os.path.join(run_root, ablation.name, question.id)
    registry = AssetRegistry(run_dir=run_dir, alignment=ablation.alignment)
    if ablation.data_ingested:
        ingest_manifest(case_dir, registry)

    gazetteer_path = os.path.join(case_dir, GAZETTEER_FILE)
    gazetteer = Gazetteer.load(gazetteer_path, settings.aliases) if os.path.exists(gazetteer_path) else None

    if provider_kind == "scripted":
        path = script_path(case_dir, question.id, ablation.script_kind)
        if not os.path.exists(path):
            raise MissingTranscript(f"No {ablation.script_kind} transcript for {question.id} at {path}")
        provider = ScriptedProvider.from_file(path, registry)
    else:
        provider = build_provider(provider_kind, settings.provider)

    trace = TraceWriter(os.path.join(run_dir, "trace.jsonl"))
    answer = run_agent(question.prompt, registry, ablation.toolset(), provider, settings,
                       Transcript(settings.agent.history_window), gazetteer, previews=ablation.previews,
                       trace=trace)
    score = score_answer(answer, question.oracle, registry, question.id)
    tool_calls = answer.turn.tool_calls if answer.turn is not None else 0
    logger.info(f"{ablation.name} {question.id}: {'pass' if score.passed else 'fail'} {score.diagnostics}")
    return QuestionOutcome(question.id, question.level, ablation.name, score.passed, score.diagnostics,
                           answer.text, tool_calls)


def run_eval(fixtures_dir: str, ablations: Sequence[str] = ABLATION_ORDER, settings: Optional[Settings] = None,
             out_dir: Optional[str] = None, provider_kind: str = "scripted", workers: int = 1,
             progress: bool = False) -> List[EvalReport]:
    """Score every fixture question under each named ablation."""
    settings = settings or Settings()
    out_dir = out_dir or settings.paths.run_dir
    cases = discover_cases(fixtures_dir)
    if not cases:
        raise MissingOracle(f"No fixture cases with {QUESTIONS_FILE} under {fixtures_dir}")
    questions = [(q, case_dir) for case_dir in cases for q in load_questions(case_dir)]
    logger.info(f"Evaluating {len(questions)} questions from {len(cases)} cases under {list(ablations)}")

    reports = []
    for name in ablations:
        ablation = get_ablation(name)

        def job(item):
            question, case_dir = item
            return run_question(question, case_dir, ablation, settings, out_dir, provider_kind)

        items = tqdm(questions, desc=name, disable=not progress)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(job, items))
        else:
            outcomes = [job(item) for item in items]
        report = EvalReport(name, outcomes)
        reports.append(report)
        logger.info(f"Ablation {report.row()}")
        _write_outcomes(out_dir, report)
    return reports


def _write_outcomes(out_dir: str, report: EvalReport) -> None:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"eval_{report.config}.jsonl")
    with open(path, "w", encoding="utf-8") as handle:
        for outcome in report.outcomes:
            handle.write(json.dumps(outcome.__dict__, sort_keys=True) + "\n")
