"""Modality controller: align user demand, select assets, aggregate sub-results."""
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

from src.controller.gazetteer import Gazetteer, Place
from src.errors import (
    AgentError,
    DanglingArtifact,
    EmptyQuery,
    EmptyResults,
    InvalidParameter,
    NoMatchingAssets,
)
from src.registry import AssetRegistry, Modality, TimeRange
from src.utils.formatting import extract_filenames, extract_numerals, numerals_grounded
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class AnalysisLevel(str, Enum):
    WHAT = "What"
    WHERE = "Where"
    WHY = "Why"

    @property
    def depth(self) -> int:
        return LEVEL_ORDER.index(self)

    def __lt__(self, other):
        if not isinstance(other, AnalysisLevel):
            return NotImplemented
        return self.depth < other.depth


LEVEL_ORDER = (AnalysisLevel.WHAT, AnalysisLevel.WHERE, AnalysisLevel.WHY)

# Checked in this order; the first level with a matching pattern wins
LEVEL_RULES = (
    (AnalysisLevel.WHY, re.compile(
        r"\bwhy\b|correlat|influen(?:tial|cing) factor|explain the relationship|relationship between"
        r"|driving factor|what factors|\bcaus(?:e|ed|es) of",
        re.IGNORECASE,
    )),
    (AnalysisLevel.WHERE, re.compile(
        r"distribution map|cluster map|\bwhere\b|\bmaps?\b|heat ?map|choropleth|spatial(?:ly)? distribut"
        r"|hotspots?|how are .* distributed|distributed",
        re.IGNORECASE,
    )),
    (AnalysisLevel.WHAT, re.compile(
        r"how many|how much|number of|\bnames?\b|\blist\b|average|\bmean\b|proportion|percentage"
        r"|\btotal\b|\bcount\b|\bwhat\b|\bwhich\b|\bchanged?\b|\bdescribe\b",
        re.IGNORECASE,
    )),
)

RELEVANT_MODALITIES = {
    AnalysisLevel.WHAT: (Modality.TABLE, Modality.VECTOR, Modality.RASTER),
    AnalysisLevel.WHERE: (Modality.TABLE, Modality.VECTOR),
    AnalysisLevel.WHY: (Modality.TABLE, Modality.VECTOR),
}
MODALITY_ORDER = (Modality.TABLE, Modality.VECTOR, Modality.RASTER, Modality.IMAGE)

_MONTHS = {
    name: index
    for index, names in enumerate(
        [("january", "jan"), ("february", "feb"), ("march", "mar"), ("april", "apr"), ("may",),
         ("june", "jun"), ("july", "jul"), ("august", "aug"), ("september", "sep", "sept"),
         ("october", "oct"), ("november", "nov"), ("december", "dec")],
        start=1,
    )
    for name in names
}
_YEAR = r"(1[89]\d{2}|2[01]\d{2})"
_MONTH_YEAR = re.compile(rf"\b({'|'.join(sorted(_MONTHS, key=len, reverse=True))})\.?,?\s+{_YEAR}\b", re.IGNORECASE)
_ISO_DATE = re.compile(rf"\b{_YEAR}-(\d{{2}})-(\d{{2}})\b")
_RANGE = re.compile(
    rf"(?:between\s+{_YEAR}\s+and\s+{_YEAR})|(?:from\s+{_YEAR}\s+(?:to|until|through)\s+{_YEAR})"
    rf"|(?:\b{_YEAR}\s*(?:-|–|to)\s*{_YEAR}\b)",
    re.IGNORECASE,
)
_BARE_YEAR = re.compile(rf"(?<![\d.]){_YEAR}(?![\d.])")

CLASSIFIER_PROMPT = (
    "Classify the analysis level of the question as exactly one word: What (description), "
    "Where (spatial distribution) or Why (influential factors).\nQuestion: {query}\nLevel:"
)


@dataclass(frozen=True)
class AlignedQuery:
    raw: str
    level: AnalysisLevel
    location: Optional[Place] = None
    time: Optional[TimeRange] = None
    notes: tuple = ()

    def describe(self) -> str:
        place = "any"
        if self.location is not None:
            place = self.location.name + (f" {self.location.bbox}" if self.location.bbox else "")
        when = str(self.time) if self.time else "any"
        return f"level: {self.level.value}; location: {place}; time: {when}"


@dataclass(frozen=True)
class SubResult:
    subtask: str
    text: str
    artifacts: tuple = ()


@dataclass
class AgentAnswer:
    text: str
    artifacts: List[str] = field(default_factory=list)
    turn: Optional[object] = None
    incomplete: bool = False
    ungrounded: bool = False
    missing_numerals: List[float] = field(default_factory=list)
    fabricated_files: List[str] = field(default_factory=list)

    @property
    def flags(self) -> List[str]:
        flags = []
        if self.incomplete:
            flags.append("incomplete")
        if self.ungrounded:
            flags.append("ungrounded")
        if self.missing_numerals:
            flags.append("unsupported numerals")
        if self.fabricated_files:
            flags.append("fabricated file names")
        return flags


# --------------------------------------------------------------- align_demand
def classify_level(query: str, classifier=None) -> AnalysisLevel:
    """Rules first; the language model only sees queries no rule matches."""
    for level, pattern in LEVEL_RULES:
        if pattern.search(query):
            return level
    if classifier is not None:
        try:
            reply = classifier.complete(CLASSIFIER_PROMPT.format(query=query))
            for level in (AnalysisLevel.WHY, AnalysisLevel.WHERE, AnalysisLevel.WHAT):
                if re.search(rf"\b{level.value}\b", reply, re.IGNORECASE):
                    logger.info(f"Level '{level.value}' assigned by the language model")
                    return level
        except AgentError as e:
            logger.warning(f"Level classification fallback failed: {e}")
    return AnalysisLevel.WHAT


def is_data_dependent(query: str, registry: AssetRegistry) -> bool:
    """True when a level rule matches the query or it names a registered asset by alias or file stem."""
    if any(pattern.search(query) for _, pattern in LEVEL_RULES):
        return True
    words = set(re.findall(r"[\w-]+", query.lower()))
    for asset in registry.list_assets():
        stem = os.path.splitext(asset.filename)[0].lower()
        if stem in words or (asset.name and asset.name.lower() in words):
            return True
    return False


def extract_time(query: str) -> Optional[TimeRange]:
    """Union of every month-year, ISO date, year range and bare year in the text."""
    pieces: List[TimeRange] = []
    text = query

    def consume(pattern, build):
        nonlocal text
        for match in pattern.finditer(text):
            pieces.append(build(match))
        text = pattern.sub(" ", text)

    consume(_MONTH_YEAR, lambda m: TimeRange.parse(f"{m.group(2)}-{_MONTHS[m.group(1).lower()]:02d}"))
    consume(_ISO_DATE, lambda m: TimeRange.parse(m.group(0)))

    def year_range(match):
        years = sorted(int(g) for g in match.groups() if g)
        return TimeRange.years(years[0], years[-1])

    consume(_RANGE, year_range)
    consume(_BARE_YEAR, lambda m: TimeRange.years(int(m.group(1)), int(m.group(1))))
    if not pieces:
        return None
    return TimeRange(min(p.start for p in pieces), max(p.end for p in pieces))


def align_demand(query: str, gazetteer: Optional[Gazetteer] = None, default_location: Optional[str] = None,
                 default_time: Optional[str] = None, classifier=None) -> AlignedQuery:
    """Normalize a query into (level, location, time)."""
    if query is None or not query.strip():
        raise EmptyQuery("Query is empty")
    query = query.strip()
    level = classify_level(query, classifier)
    notes = []

    location = gazetteer.lookup(query) if gazetteer is not None else None
    if location is None and default_location:
        location = (gazetteer.get(default_location) if gazetteer is not None else None) or Place(default_location)
        notes.append(f"No place was named; using the default location {location.name}.")
    elif location is None:
        notes.append("No place was named; data for all locations was considered.")

    time = extract_time(query)
    if time is None and default_time:
        time = TimeRange.parse(default_time)
        notes.append("No time was named; using the configured default period.")
    elif time is None:
        notes.append("No time was named; data for all periods was considered.")

    aligned = AlignedQuery(query, level, location, time, tuple(notes))
    logger.info(f"Aligned query: {aligned.describe()}")
    return aligned


# ----------------------------------------------------------- select_modalities
def _time_matches(tag: Optional[str], wanted: Optional[TimeRange]) -> bool:
    if wanted is None or not tag:
        return True
    try:
        return TimeRange.parse(tag).intersects(wanted)
    except (InvalidParameter, ValueError):
        logger.debug(f"Unparseable time tag {tag!r}; asset kept")
        return True


def _table_columns(registry: AssetRegistry, guid: str) -> List[str]:
    return list(registry.payload(guid).columns)


def select_modalities(aligned: AlignedQuery, registry: AssetRegistry) -> List[str]:
    """Assets relevant to the query, ordered by (modality, GUID text)."""
    if len(registry) == 0:
        raise NoMatchingAssets("The registry holds no data assets")
    wanted = RELEVANT_MODALITIES[aligned.level]
    box = aligned.location.bbox if aligned.location is not None else None
    chosen = [
        asset for asset in registry.list_assets()
        if asset.modality in wanted
        and _time_matches(asset.time_tag, aligned.time)
        and (box is None or asset.geo_extent is None or asset.geo_extent.intersects(box))
    ]
    chosen.sort(key=lambda a: (MODALITY_ORDER.index(a.modality), a.guid))
    if not chosen:
        raise NoMatchingAssets(f"No data asset matches {aligned.describe()}")

    if aligned.level == AnalysisLevel.WHERE and not any(a.modality == Modality.VECTOR for a in chosen):
        raise NoMatchingAssets("A distribution map needs a polygon basemap, but no Vector asset matches the query")
    if aligned.level == AnalysisLevel.WHY:
        tables = [a.guid for a in chosen if a.modality == Modality.TABLE]
        counts: Dict[str, int] = {}
        for guid in tables:
            for column in set(_table_columns(registry, guid)):
                counts[column] = counts.get(column, 0) + 1
        if not any(n >= 2 for n in counts.values()):
            raise NoMatchingAssets("Factor analysis needs two tables sharing a group key; none match the query")

    logger.info(f"Selected {len(chosen)} assets for {aligned.level.value}-level query")
    return [a.guid for a in chosen]


# ----------------------------------------------------------- aggregate_results
def aggregate_results(sub_results: Sequence[SubResult], registry: AssetRegistry,
                      notes: Sequence[str] = ()) -> AgentAnswer:
    """Join sub-results in order and cite every artifact by its file name once."""
    if not sub_results:
        raise EmptyResults("No sub-results to aggregate")
    artifacts: List[str] = []
    for result in sub_results:
        for guid in result.artifacts:
            if guid not in registry:
                raise DanglingArtifact(f"Artifact {guid} is not registered")
            if registry.resolve(guid).guid not in artifacts:
                artifacts.append(registry.resolve(guid).guid)

    text = "\n".join(result.text.strip() for result in sub_results)
    uncited = [registry.resolve(g).filename for g in artifacts if registry.resolve(g).filename not in text]
    if uncited:
        text += "\nFiles: " + ", ".join(uncited)
    if notes:
        text += "\n" + " ".join(notes)
    return AgentAnswer(text=text, artifacts=artifacts)


def unsupported_numerals(answer: str, observations: Sequence[str], query: str) -> List[float]:
    """Numerals of the answer that occur in no observation and not in the query."""
    evidence = []
    for text in list(observations) + [query]:
        evidence.extend(extract_numerals(text))
    return numerals_grounded(answer, evidence)


def fabricated_filenames(answer: str, registry: AssetRegistry) -> List[str]:
    return [name for name in extract_filenames(answer) if not registry.contains_filename(name)]
