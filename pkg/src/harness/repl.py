"""Interactive session: natural-language turns plus a few colon commands."""
from typing import Callable, Iterable, List, Optional

from src.agent.loop import run_agent
from src.agent.memory import Transcript
from src.agent.providers import CompletionProvider
from src.agent.tools import ToolSet
from src.agent.trace import TraceWriter
from src.config import Settings
from src.controller.gazetteer import Gazetteer
from src.data_loader import ingest_path
from src.errors import ProviderError, UrbanAgentError
from src.registry import AssetRegistry
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

PROMPT = "urban> "
HELP = """Commands:
  :ingest <path>    register a file, a directory or a manifest directory
  :assets           list registered assets
  :lineage <ref>    show an asset and its ancestors (GUID, alias or file name)
  :help             show this help
  :quit             leave the session
Anything else is answered by the agent."""


def describe_asset(registry: AssetRegistry, guid: str) -> str:
    asset = registry.resolve(guid)
    alias = f" [{asset.name}]" if asset.name else ""
    origin = "derived" if asset.derived else "ingested"
    return f"{asset.filename}{alias} {asset.modality.value} {origin} {asset.guid}"


class Repl:
    """One registry and one transcript for the whole session."""

    def __init__(self, registry: AssetRegistry, tools: ToolSet, provider: CompletionProvider,
                 settings: Optional[Settings] = None, gazetteer: Optional[Gazetteer] = None,
                 trace: Optional[TraceWriter] = None, previews: bool = False):
        self.registry = registry
        self.tools = tools
        self.provider = provider
        self.settings = settings or Settings()
        self.gazetteer = gazetteer
        self.trace = trace or TraceWriter()
        self.previews = previews
        self.transcript = Transcript(self.settings.agent.history_window)
        self.running = True

    def _ingest(self, argument: str) -> str:
        if not argument:
            return "Usage: :ingest <path>"
        ingested = ingest_path(argument, self.registry)
        return "\n".join(f"Ingested {describe_asset(self.registry, guid)}" for guid in ingested.values())

    def _assets(self) -> str:
        assets = self.registry.list_assets()
        if not assets:
            return "No assets registered."
        return "\n".join(describe_asset(self.registry, a.guid) for a in assets)

    def _lineage(self, argument: str) -> str:
        if not argument:
            return "Usage: :lineage <ref>"
        guid = self.registry.find(argument).guid
        return "\n".join(describe_asset(self.registry, g) for g in self.registry.trace_lineage(guid))

    def ask(self, query: str) -> str:
        answer = run_agent(query, self.registry, self.tools, self.provider, self.settings, self.transcript,
                           self.gazetteer, previews=self.previews, trace=self.trace)
        lines = [answer.text]
        if answer.flags:
            lines.append(f"[flags: {', '.join(answer.flags)}]")
        return "\n".join(lines)

    def handle(self, line: str) -> str:
        """Output for one input line; ``:quit`` clears ``running``."""
        line = line.strip()
        if not line:
            return ""
        command, _, argument = line.partition(" ")
        argument = argument.strip()
        try:
            if command == ":quit":
                self.running = False
                return "Bye."
            if command == ":help":
                return HELP
            if command == ":ingest":
                return self._ingest(argument)
            if command == ":assets":
                return self._assets()
            if command == ":lineage":
                return self._lineage(argument)
            if command.startswith(":"):
                return f"Unknown command {command}. Type :help for the list."
            return self.ask(line)
        except ProviderError as e:
            logger.error(f"Provider failed during the session: {str(e)}")
            return f"Provider error: {e}"
        except UrbanAgentError as e:
            logger.warning(f"Command {command} failed: {e}")
            return f"Error: {type(e).__name__}: {e}"

    def run(self, lines: Iterable[str], write: Callable[[str], None]) -> List[str]:
        """Feed lines until exhausted or ``:quit``; returns everything written."""
        outputs = []
        for line in lines:
            output = self.handle(line)
            if output:
                write(output)
                outputs.append(output)
            if not self.running:
                break
        return outputs
