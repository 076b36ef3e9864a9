"""Prompt templates and budgeted prompt assembly."""
from dataclasses import dataclass
from typing import Dict, Optional

from src.errors import BudgetExceeded
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

PREFIX = """You are an urban change analyst. You answer questions about how a city changes over time \
using the registered data files: tables, polygon layers and land-cover grids.

Data rules:
- Every file is referenced by its alias, its file name or its GUID. Derived files get new names; \
pass a "name" parameter to give an output an alias you can reuse.
- The files can be large, so NEVER use ANY tool to print the entire contents of a file for review. \
Work with filters, aggregates and summaries instead.
- Only use the tools below, and only use the information they return to build your final answer.

TOOLS:
------
You have access to the following tools:
{tools}
"""

FORMAT_INSTRUCTIONS = """To use a tool, please use the following format:

```
Thought: you should always think about what to do
Action: the action to take, should be one of [{tool_names}]
Action Input: the input to the action, a single-line JSON object of named parameters
Observation: the result of the action
```

... (this Thought/Action/Action Input/Observation can repeat N times)

When you have the answer, or if you do not need a tool, you MUST use the format:

```
Thought: I now know the final answer
Final Answer: the final answer to the original input question
```

Start your first Thought with "Plan:" and list the sub-tasks you will work through.
"""

NO_TOOLS_INSTRUCTIONS = """No tools are available. Answer directly in the format:

```
Thought: what you can tell from the context
Final Answer: the final answer to the original input question
```
"""

SUFFIX = """You are very strict about file name correctness and will never fake a file name that does not exist.
Remember to give the file name of a derived file exactly as it appears in the last tool observation.
Your answers must always be based on the actual data retrieved from the files. \
If the information is not available, you must state that the information is not available.

Begin!

Previous conversation history:
{chat_history}

Question: {input}
{agent_scratchpad}"""

CORRECTIVE_NOTE = (
    "Your last reply could not be parsed. Reply with either 'Action:' and 'Action Input:' lines "
    "or a 'Final Answer:' line, exactly as the format instructions describe."
)

SLOT_ORDER = ("prefix", "format_instructions", "history", "input", "scratchpad")


@dataclass(frozen=True)
class PromptBundle:
    prefix: str = PREFIX
    format_instructions: str = FORMAT_INSTRUCTIONS
    suffix: str = SUFFIX
    no_tools_instructions: str = NO_TOOLS_INSTRUCTIONS


def _history_text(history) -> str:
    if history is None:
        return ""
    if isinstance(history, str):
        return history
    return history.render()


def render_slots(bundle: PromptBundle, tools, history, input_text: str, scratchpad: str) -> Dict[str, str]:
    """Rendered text of every slot, keyed by slot name."""
    tool_list = tools.describe() if tools is not None and len(tools) else "(none)"
    if tools is not None and len(tools):
        format_text = bundle.format_instructions.format(tool_names=", ".join(tools.names()))
    else:
        format_text = bundle.no_tools_instructions
    return {
        "prefix": bundle.prefix.format(tools=tool_list),
        "format_instructions": format_text,
        "history": _history_text(history) or "(none)",
        "input": input_text,
        "scratchpad": scratchpad or "",
    }


def assemble_prompt(bundle: PromptBundle, tools, history, input_text: str, scratchpad: str = "",
                    budget_chars: Optional[int] = None) -> str:
    """Prefix, format instructions and suffix with every slot filled.

    Raises BudgetExceeded naming the largest slot when the prompt is longer
    than ``budget_chars``.
    """
    slots = render_slots(bundle, tools, history, input_text, scratchpad)
    suffix = bundle.suffix.format(
        chat_history=slots["history"],
        input=slots["input"],
        agent_scratchpad=slots["scratchpad"],
    )
    prompt = "\n\n".join([slots["prefix"], slots["format_instructions"], suffix])
    if budget_chars is not None and len(prompt) > budget_chars:
        largest = max(SLOT_ORDER, key=lambda name: len(slots[name]))
        logger.warning(f"Prompt of {len(prompt)} chars over budget {budget_chars}; largest slot {largest}")
        raise BudgetExceeded(largest, len(prompt), budget_chars)
    return prompt
