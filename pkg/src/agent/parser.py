"""Parser for the Thought / Action / Action Input / Final Answer completion grammar."""
import re
from dataclasses import dataclass
from typing import List, Union

from src.errors import UnparseableCompletion

_MARKER = re.compile(
    r"(?P<label>Thought|Action\s*Input|Action|Observation|Final\s*Answer)\s*:",
    re.IGNORECASE,
)
_FINAL = re.compile(r"Final\s*Answer\s*:", re.IGNORECASE)
_TOOL_NAME = re.compile(r"[A-Za-z_][\w.-]*")
_FENCE = re.compile(r"^```[\w-]*\s*|\s*```$")


@dataclass
class AgentStep:
    thought: str
    action: str
    action_input: str
    observation: str = ""


@dataclass
class FinalAnswer:
    answer: str
    thought: str = ""


ParsedCompletion = Union[AgentStep, FinalAnswer]


def _label(match) -> str:
    return re.sub(r"\s+", "", match.group("label")).lower()


def _markers(text: str) -> List[tuple]:
    """(label, marker start, content start) for every marker at a line start or after a space."""
    found = []
    for match in _MARKER.finditer(text):
        before = text[:match.start()]
        if before and not before[-1].isspace() and before[-1] not in "`*.":
            continue
        found.append((_label(match), match.start(), match.end()))
    return found


def _section(text: str, markers: List[tuple], label: str) -> Union[str, None]:
    for index, (name, _, content_start) in enumerate(markers):
        if name == label:
            end = markers[index + 1][1] if index + 1 < len(markers) else len(text)
            return text[content_start:end]
    return None


def _clean(text: str) -> str:
    return text.strip().strip("*").strip()


def _thought(text: str, markers: List[tuple]) -> str:
    thought = _section(text, markers, "thought")
    if thought is not None:
        return _clean(thought)
    first = markers[0][1] if markers else len(text)
    return _clean(text[:first])


def _action_name(raw: str) -> str:
    line = raw.strip().splitlines()[0] if raw.strip() else ""
    match = _TOOL_NAME.search(line.strip("`'\"[]() "))
    if match is None:
        raise UnparseableCompletion(f"Action line names no tool: {line!r}")
    return match.group(0).rstrip(".")


def _action_input(raw: str) -> str:
    text = raw.strip()
    while True:
        stripped = _FENCE.sub("", text).strip()
        if stripped == text:
            return text
        text = stripped


def parse_step(completion: str) -> ParsedCompletion:
    """Read one completion as a tool step or a final answer.

    "Final Answer:" wins over an Action when both appear; the answer runs to
    the end of the text.
    """
    text = (completion or "").strip()
    final = _FINAL.search(text)
    markers = _markers(text)
    if final is not None:
        answer = text[final.end():].strip()
        thought_markers = [m for m in markers if m[1] < final.start()]
        thought = _thought(text[:final.start()], thought_markers)
        return FinalAnswer(answer=answer, thought=thought)

    action = _section(text, markers, "action")
    if action is None:
        raise UnparseableCompletion(
            f"Completion has neither an Action nor a Final Answer: {text[:120]!r}"
        )
    action_input = _section(text, markers, "actioninput")
    observation = _section(text, markers, "observation")
    return AgentStep(
        thought=_thought(text, markers),
        action=_action_name(action),
        action_input=_action_input(action_input) if action_input is not None else "",
        observation=observation.strip() if observation is not None else "",
    )


def render_step(step: AgentStep) -> str:
    """Scratchpad text of one step; parse_step reads it back to an equal step."""
    lines = [
        f"Thought: {step.thought}",
        f"Action: {step.action}",
        f"Action Input: {step.action_input}",
    ]
    if step.observation:
        lines.append(f"Observation: {step.observation}")
    return "\n".join(lines)


def render_scratchpad(steps: List[AgentStep]) -> str:
    if not steps:
        return ""
    return "\n".join(render_step(step) for step in steps) + "\nThought:"
