import pytest

from src.agent.memory import Transcript, Turn
from src.agent.parser import AgentStep
from src.agent.prompts import NO_TOOLS_INSTRUCTIONS, PromptBundle, assemble_prompt, render_slots
from src.agent.tools import build_toolset
from src.errors import BudgetExceeded


def test_every_tool_is_named_in_the_prompt():
    tools = build_toolset()
    prompt = assemble_prompt(PromptBundle(), tools, None, "How many parks?")
    for name in tools.names():
        assert f"> {name}: " in prompt
    assert prompt.count("filter_rows") >= 2
    assert "Question: How many parks?" in prompt
    assert 'Start your first Thought with "Plan:"' in prompt


def test_slots_appear_in_order():
    transcript = Transcript()
    transcript.add(Turn("first question", answer="first answer"))
    prompt = assemble_prompt(PromptBundle(), build_toolset(["tabular"]), transcript, "second question",
                             scratchpad="Thought: Plan: look\nAction: describe\nAction Input: {}\nThought:")
    positions = [prompt.index(marker) for marker in (
        "TOOLS:", "To use a tool", "Question: first question\nFinal Answer: first answer",
        "Question: second question", "Action: describe",
    )]
    assert positions == sorted(positions)
    assert prompt.endswith("\nThought:")


def test_no_tools_uses_direct_answer_instructions():
    prompt = assemble_prompt(PromptBundle(), build_toolset([]), None, "Where are the hotspots?")
    assert NO_TOOLS_INSTRUCTIONS in prompt
    assert "(none)" in prompt
    assert "Action Input:" not in prompt


def test_budget_names_the_largest_slot():
    transcript = Transcript()
    transcript.add(Turn("q", answer="x" * 5000))
    with pytest.raises(BudgetExceeded) as info:
        assemble_prompt(PromptBundle(), build_toolset(["tabular"]), transcript, "q2", budget_chars=4000)
    assert info.value.slot == "history"
    assert info.value.budget == 4000
    assert info.value.size > 4000


def test_prompt_within_budget():
    prompt = assemble_prompt(PromptBundle(), build_toolset(["raster"]), "", "q", budget_chars=100_000)
    assert len(prompt) < 100_000


def test_render_slots_fills_empty_history():
    slots = render_slots(PromptBundle(), build_toolset(["raster"]), None, "q", "")
    assert slots["history"] == "(none)"
    assert slots["format_instructions"].count("clip") == 1


def test_transcript_window_drops_oldest_turns():
    transcript = Transcript(window=2)
    for i in range(3):
        transcript.add(Turn(f"q{i}", answer=f"a{i}"))
    assert [t.query for t in transcript.turns] == ["q1", "q2"]
    assert transcript.render() == "Question: q1\nFinal Answer: a1\nQuestion: q2\nFinal Answer: a2"
    assert transcript.evict_oldest().query == "q1"
    assert len(transcript) == 1


def test_turn_counts_tool_calls():
    turn = Turn("q", steps=[AgentStep("t", "describe", "{}"), AgentStep("t", "dbscan", "{}")])
    assert turn.tool_calls == 2
    assert not turn.incomplete
    assert Transcript().evict_oldest() is None
