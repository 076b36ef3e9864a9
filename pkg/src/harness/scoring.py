"""Score agent answers against fixture oracles."""
import math
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from src.controller.modality_controller import AgentAnswer
from src.errors import MissingOracle
from src.registry import AssetRegistry
from src.utils.formatting import extract_numerals, format_number
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

DEFAULT_TOLERANCES = {"count": 1e-6, "value": 1e-6, "proportion": 1e-3}

_SENTENCE_BREAK = re.compile(r"(?<=[.!?;])\s+|\n")


@dataclass
class ScoreResult:
    question_id: str
    passed: bool
    diagnostics: List[str] = field(default_factory=list)


def _numerals_near(text: str, word: Optional[str]) -> List[float]:
    """Numerals of the sentences mentioning ``word`` (all of them when no word is given)."""
    if not word:
        return extract_numerals(text)
    found = []
    for sentence in _SENTENCE_BREAK.split(text):
        if word.lower() in sentence.lower():
            found.extend(extract_numerals(sentence))
    return found


def number_matches(text: str, spec: Dict[str, Any]) -> bool:
    """True when a numeral of ``text`` equals the expected value within tolerance.

    Signs must agree unless the spec sets ``magnitude`` (answers phrased as "decreased by 26").
    """
    expected = float(spec["value"])
    tolerance = float(spec.get("tolerance", DEFAULT_TOLERANCES.get(spec.get("kind", "value"), 1e-6)))
    by_magnitude = bool(spec.get("magnitude"))
    for found in _numerals_near(text, spec.get("near")):
        if by_magnitude:
            found, target = abs(found), abs(expected)
        else:
            target = expected
        if math.isclose(found, target, rel_tol=tolerance, abs_tol=1e-9):
            return True
    return False


def score_answer(answer: AgentAnswer, expected: Optional[Dict[str, Any]], registry: Optional[AssetRegistry] = None,
                 question_id: str = "") -> ScoreResult:
    """Pass only when the answer is clean, grounded and carries every expected value and artifact."""
    if expected is None:
        raise MissingOracle(f"Question {question_id or '?'} has no oracle")
    diagnostics = [f"Flagged: {flag}" for flag in answer.flags]
    text = answer.text

    for spec in expected.get("numbers", []):
        if not number_matches(text, spec):
            where = f" near '{spec['near']}'" if spec.get("near") else ""
            diagnostics.append(f"MissingNumber: expected {format_number(spec['value'])}{where}")
    for needle in expected.get("substrings", []):
        if needle.lower() not in text.lower():
            diagnostics.append(f"MissingSubstring: {needle!r}")

    if registry is not None:
        for guid in answer.artifacts:
            if guid not in registry or not registry.is_grounded(guid):
                diagnostics.append(f"UngroundedArtifact: {guid} does not trace back to ingested data")
        for kind in expected.get("artifacts", []):
            produced = [g for g in answer.artifacts
                        if g in registry and registry.resolve(g).modality.value == kind]
            if not produced:
                diagnostics.append(f"MissingArtifact: no {kind} asset in the answer")
    elif expected.get("artifacts"):
        diagnostics.append("MissingArtifact: no registry to check artifacts against")

    passed = not diagnostics
    logger.debug(f"Scored {question_id or 'answer'}: {'pass' if passed else 'fail'} {diagnostics}")
    return ScoreResult(question_id, passed, diagnostics)
