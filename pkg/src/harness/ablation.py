"""Agent variants with capabilities switched off, for the ablation grid."""
from dataclasses import dataclass
from typing import Dict, FrozenSet

from src.agent.tools import FAMILIES, ToolSet, build_toolset
from src.errors import InvalidParameter


@dataclass(frozen=True)
class AblationConfig:
    name: str
    data_ingested: bool
    toolkit: FrozenSet[str]
    alignment: bool
    previews: bool = False

    @property
    def script_kind(self) -> str:
        """Which authored transcript a question replays under this config."""
        return "tools" if self.toolkit else "direct"

    def toolset(self) -> ToolSet:
        return build_toolset(self.toolkit)


ABLATIONS: Dict[str, AblationConfig] = {
    "full": AblationConfig("full", True, frozenset(FAMILIES), True),
    "single_modality": AblationConfig("single_modality", True, frozenset({"tabular"}), True),
    "data_only": AblationConfig("data_only", True, frozenset(), True, previews=True),
    "no_alignment": AblationConfig("no_alignment", True, frozenset(FAMILIES), False),
    "standalone": AblationConfig("standalone", False, frozenset(), True),
}

ABLATION_ORDER = ("standalone", "no_alignment", "data_only", "single_modality", "full")


def get_ablation(name: str) -> AblationConfig:
    try:
        return ABLATIONS[name]
    except KeyError:
        raise InvalidParameter(f"Unknown ablation {name!r}; use one of {', '.join(ABLATION_ORDER)}")
