"""Conversation memory: completed turns kept within a sliding window."""
from dataclasses import dataclass, field
from datetime import datetime
from typing import List, Optional

from src.agent.parser import AgentStep


@dataclass
class Turn:
    query: str
    steps: List[AgentStep] = field(default_factory=list)
    answer: str = ""
    incomplete: bool = False
    started_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))

    @property
    def tool_calls(self) -> int:
        return len(self.steps)


class Transcript:
    """Turns in time order; eviction drops the oldest whole turns."""

    def __init__(self, window: Optional[int] = None):
        self.window = window
        self.turns: List[Turn] = []

    def __len__(self):
        return len(self.turns)

    def add(self, turn: Turn) -> None:
        self.turns.append(turn)
        if self.window is not None:
            while len(self.turns) > self.window:
                self.evict_oldest()

    def evict_oldest(self) -> Optional[Turn]:
        if not self.turns:
            return None
        return self.turns.pop(0)

    def render(self) -> str:
        return "\n".join(f"Question: {t.query}\nFinal Answer: {t.answer}" for t in self.turns)
