"""The multi-round reason-and-act loop tying controller, prompts, provider and tools together."""
import time
from typing import List, Optional, Tuple

from src.agent.memory import Transcript, Turn
from src.agent.parser import AgentStep, FinalAnswer, parse_step, render_scratchpad
from src.agent.prompts import CORRECTIVE_NOTE, PromptBundle, assemble_prompt
from src.agent.providers import CompletionProvider
from src.agent.tools import ToolContext, ToolSet, execute_tool
from src.agent.trace import TraceWriter, digest
from src.config import Settings
from src.controller.gazetteer import Gazetteer
from src.controller.modality_controller import (
    MODALITY_ORDER,
    AgentAnswer,
    AlignedQuery,
    SubResult,
    aggregate_results,
    align_demand,
    fabricated_filenames,
    is_data_dependent,
    select_modalities,
    unsupported_numerals,
)
from src.data_processor import Table
from src.errors import (
    BudgetExceeded,
    ControllerError,
    ProviderError,
    RoundLimitExceeded,
    ScriptExhausted,
    UnknownTool,
    UnparseableCompletion,
    UrbanAgentError,
)
from src.registry import AssetRegistry, Modality
from src.utils.formatting import extract_filenames
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class _Stop(Exception):
    """Ends the round loop without a final answer."""


def _selected_assets(aligned: AlignedQuery, registry: AssetRegistry) -> Tuple[List[str], List[str]]:
    if not registry.alignment:
        assets = [a for a in registry.list_assets() if a.modality != Modality.IMAGE]
        assets.sort(key=lambda a: (MODALITY_ORDER.index(a.modality), a.guid))
        return [a.guid for a in assets], []
    try:
        return select_modalities(aligned, registry), []
    except ControllerError as e:
        logger.warning(f"Asset selection failed: {e}")
        return [], ["No registered data matched the question."]


def build_input(aligned: AlignedQuery, registry: AssetRegistry, selected: List[str],
                previews: bool, preview_chars: int) -> Tuple[str, bool]:
    """Question text plus the selected assets' schema summaries (and small tables in full when asked)."""
    lines = [aligned.raw, "", f"Aligned demand: {aligned.describe()}", "Data assets:"]
    shown = False
    if not selected:
        lines.append("(none)")
    for guid in selected:
        asset = registry.resolve(guid)
        alias = f"{asset.name}: " if asset.name else ""
        when = f", time {asset.time_tag}" if asset.time_tag else ""
        lines.append(f"- {alias}{asset.filename} ({asset.modality.value}{when}, GUID {guid}) {asset.schema_summary}")
        if previews and asset.modality == Modality.TABLE:
            payload = registry.payload(guid)
            text = payload.to_text() if isinstance(payload, Table) else ""
            if text and len(text) <= preview_chars:
                lines.append(f"Contents of {asset.filename}:\n{text}")
                shown = True
    return "\n".join(lines), shown


def _prompt(bundle: PromptBundle, tools: ToolSet, transcript: Transcript, input_text: str,
            steps: List[AgentStep], budget: int) -> str:
    scratchpad = render_scratchpad(steps)
    while True:
        try:
            return assemble_prompt(bundle, tools, transcript, input_text, scratchpad, budget)
        except BudgetExceeded as e:
            if e.slot == "history" and len(transcript):
                dropped = transcript.evict_oldest()
                logger.info(f"Evicted oldest turn from history ({dropped.query[:40]!r}) to fit the budget")
                continue
            raise


def dispatch(step: AgentStep, tools: ToolSet, context: ToolContext, trace: TraceWriter) -> Tuple[str, Tuple[str, ...], bool]:
    """Run one tool call; failures become observation text."""
    start = time.perf_counter()
    outputs: Tuple[str, ...] = ()
    ok = False
    try:
        tool = tools.get(step.action)
        result = execute_tool(tool, context, step.action_input)
        text, outputs, ok = result.text, result.outputs, True
    except UnknownTool as e:
        text = str(e)
    except UrbanAgentError as e:
        text = f"Error in {step.action}: {type(e).__name__}: {e}"
    except Exception as e:
        logger.error(f"Tool {step.action} failed unexpectedly: {str(e)}", exc_info=True)
        text = f"Error in {step.action}: {type(e).__name__}: {e}"
    ms = (time.perf_counter() - start) * 1000
    logger.info(f"Tool {step.action} {'ok' if ok else 'failed'} in {ms:.1f} ms; outputs {list(outputs)}")
    trace.event("tool", action=step.action, params=step.action_input, outputs=list(outputs), ok=ok,
                observation=digest(text), ms=round(ms, 3))
    return text, outputs, ok


def _complete(provider: CompletionProvider, prompt: str, trace: TraceWriter, round_no: int,
              system: Optional[str] = None) -> str:
    trace.event("prompt", round=round_no, prompt=digest(prompt), chars=len(prompt), corrective=system is not None)
    completion = provider.complete(prompt, system=system)
    trace.event("completion", round=round_no, completion=digest(completion))
    return completion


def _artifacts(registry: AssetRegistry, outputs: List[str], answer: str) -> List[str]:
    """Images produced in the turn plus derived assets the answer cites by file name."""
    artifacts = [g for g in outputs if registry.resolve(g).modality == Modality.IMAGE]
    for name in extract_filenames(answer):
        if registry.contains_filename(name):
            asset = registry.find(name)
            if asset.derived and asset.guid not in artifacts:
                artifacts.append(asset.guid)
    return artifacts


def run_agent(query: str, registry: AssetRegistry, tools: ToolSet, provider: CompletionProvider,
              settings: Optional[Settings] = None, transcript: Optional[Transcript] = None,
              gazetteer: Optional[Gazetteer] = None, previews: bool = False,
              trace: Optional[TraceWriter] = None, bundle: Optional[PromptBundle] = None) -> AgentAnswer:
    """Answer one query; the finished turn is appended to ``transcript``."""
    settings = settings or Settings()
    transcript = transcript if transcript is not None else Transcript(settings.agent.history_window)
    trace = trace or TraceWriter()
    bundle = bundle or PromptBundle()
    classifier = None if getattr(provider, "scripted", False) else provider

    aligned = align_demand(query, gazetteer, settings.defaults.location, settings.defaults.time, classifier)
    selected, selection_notes = _selected_assets(aligned, registry)
    input_text, preview_shown = build_input(aligned, registry, selected, previews, settings.agent.preview_chars)
    trace.event("query", query=aligned.raw, level=aligned.level.value, selected=selected, tools=tools.names())
    logger.info(f"Running agent on {aligned.level.value}-level query with {len(selected)} assets "
                f"and {len(tools)} tools")

    context = ToolContext(registry, settings)
    turn = Turn(query=aligned.raw)
    observations: List[str] = []
    outputs: List[str] = []
    successful_calls = 0
    final: Optional[FinalAnswer] = None
    stop_reason = ""
    max_rounds = settings.agent.max_rounds

    try:
        for round_no in range(1, max_rounds + 1):
            try:
                prompt = _prompt(bundle, tools, transcript, input_text, turn.steps, settings.agent.budget_chars)
            except BudgetExceeded as e:
                raise _Stop(str(e))
            completion = _complete(provider, prompt, trace, round_no)
            try:
                parsed = parse_step(completion)
            except UnparseableCompletion as e:
                logger.warning(f"Round {round_no}: {e}; retrying once with a corrective note")
                completion = _complete(provider, prompt, trace, round_no, system=CORRECTIVE_NOTE)
                try:
                    parsed = parse_step(completion)
                except UnparseableCompletion as again:
                    raise _Stop(f"Completion could not be parsed after a corrective retry: {again}")

            if isinstance(parsed, FinalAnswer):
                final = parsed
                break
            step = parsed
            step.observation, produced, ok = dispatch(step, tools, context, trace)
            turn.steps.append(step)
            observations.append(step.observation)
            outputs.extend(produced)
            successful_calls += int(ok)
        else:
            limit = RoundLimitExceeded(f"No final answer after {max_rounds} rounds")
            logger.warning(str(limit))
            stop_reason = str(limit)
    except _Stop as e:
        stop_reason = str(e)
        logger.warning(f"Turn stopped early: {stop_reason}")
    except ScriptExhausted as e:
        stop_reason = str(e)
        logger.warning(f"Turn stopped early: {stop_reason}")
    except ProviderError:
        turn.incomplete = True
        turn.answer = "Incomplete: the completion provider failed."
        transcript.add(turn)
        trace.event("final", incomplete=True, flags=["incomplete"])
        raise

    if final is not None:
        text = final.answer or "The information is not available."
    else:
        text = f"Incomplete: {stop_reason}"
    artifacts = _artifacts(registry, outputs, text)
    answer = aggregate_results([SubResult(aligned.raw, text, tuple(artifacts))], registry,
                               notes=list(aligned.notes) + selection_notes)
    answer.turn = turn
    answer.incomplete = final is None
    answer.ungrounded = successful_calls == 0 and not preview_shown and is_data_dependent(aligned.raw, registry)
    answer.missing_numerals = unsupported_numerals(text, observations, aligned.raw)
    answer.fabricated_files = fabricated_filenames(text, registry)

    turn.answer = answer.text
    turn.incomplete = answer.incomplete
    transcript.add(turn)
    trace.event("final", answer=digest(answer.text), artifacts=answer.artifacts, flags=answer.flags,
                rounds=len(turn.steps) + 1, tool_calls=successful_calls)
    logger.info(f"Agent finished after {len(turn.steps)} tool steps; flags: {answer.flags or 'none'}")
    return answer
