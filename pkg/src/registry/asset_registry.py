"""GUID-keyed registry of data assets with parent/child lineage."""
import heapq
import json
import os
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Union

from src.errors import (
    CycleDetected,
    InvalidParameter,
    SchemaTooLarge,
    UnknownGuid,
)
from src.registry.extent import BoundingBox
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

MAX_SUMMARY_CHARS = 2048

RELATIONS = (
    "clip", "filter", "join", "spatial_join", "cluster", "correlate", "render",
    "aggregate", "change", "validate", "select", "summarize",
)

GuidLike = Union[str, uuid.UUID]


class Modality(str, Enum):
    TABLE = "Table"
    VECTOR = "Vector"
    RASTER = "Raster"
    IMAGE = "Image"


def new_guid() -> str:
    return str(uuid.uuid4())


def render_guid(guid: uuid.UUID) -> str:
    return str(guid)


def parse_guid(text: str) -> uuid.UUID:
    """Parse canonical GUID text; raises UnknownGuid for malformed values."""
    try:
        return uuid.UUID(str(text).strip())
    except ValueError:
        raise UnknownGuid(f"Malformed GUID: {text!r}")


def _guid_text(guid: GuidLike) -> str:
    if isinstance(guid, uuid.UUID):
        return render_guid(guid)
    return str(guid).strip().lower()


@dataclass(frozen=True)
class AssetDescriptor:
    modality: Modality
    uri: str
    schema_summary: str
    geo_extent: Optional[BoundingBox] = None
    time_tag: Optional[str] = None
    name: Optional[str] = None
    derived: bool = False


@dataclass(frozen=True)
class DataAsset:
    guid: str
    modality: Modality
    uri: str
    schema_summary: str
    geo_extent: Optional[BoundingBox] = None
    time_tag: Optional[str] = None
    created_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))
    name: Optional[str] = None
    derived: bool = False

    @property
    def filename(self) -> str:
        return os.path.basename(self.uri)

    def to_record(self) -> Dict[str, Any]:
        return {
            "guid": self.guid,
            "modality": self.modality.value,
            "uri": self.uri,
            "schema_summary": self.schema_summary,
            "geo_extent": self.geo_extent.as_list() if self.geo_extent else None,
            "time_tag": self.time_tag,
            "created_at": self.created_at,
            "name": self.name,
            "derived": self.derived,
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "DataAsset":
        return cls(
            guid=record["guid"],
            modality=Modality(record["modality"]),
            uri=record["uri"],
            schema_summary=record["schema_summary"],
            geo_extent=BoundingBox.from_list(record.get("geo_extent")),
            time_tag=record.get("time_tag"),
            created_at=record["created_at"],
            name=record.get("name"),
            derived=bool(record.get("derived", False)),
        )


@dataclass(frozen=True)
class LineageEdge:
    parent: str
    child: str
    relation: str

    def to_record(self) -> Dict[str, str]:
        return {"parent": self.parent, "child": self.child, "relation": self.relation}


class AssetRegistry:
    """In-memory asset registry with an optional append-only journal.

    Reads are lock-free; register/link/derive serialize on one re-entrant lock.
    ``alignment`` switches lineage tracking of derived assets and spatial alignment on or off.
    """

    def __init__(self, run_dir: Optional[str] = None, journal_path: Optional[str] = None,
                 alignment: bool = True):
        self.run_dir = run_dir
        self.journal_path = journal_path
        self.alignment = alignment
        self.assets: Dict[str, DataAsset] = {}
        self.edges: List[LineageEdge] = []
        self._parents: Dict[str, List[str]] = {}
        self._children: Dict[str, List[str]] = {}
        self._aliases: Dict[str, str] = {}
        self._filenames: Dict[str, str] = {}
        self._payloads: Dict[str, Any] = {}
        self._lock = threading.RLock()
        self.loader: Optional[Callable[[DataAsset], Any]] = None

    # ------------------------------------------------------------------ journal
    @classmethod
    def open(cls, journal_path: str, run_dir: Optional[str] = None, alignment: bool = True) -> "AssetRegistry":
        """Restore a registry from its journal; later writes append to the same file."""
        registry = cls(run_dir=run_dir, journal_path=None, alignment=alignment)
        if os.path.exists(journal_path):
            with open(journal_path, "r", encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    if "guid" in record:
                        registry._store_asset(DataAsset.from_record(record))
                    else:
                        registry._store_edge(LineageEdge(record["parent"], record["child"], record["relation"]))
            logger.info(f"Replayed {len(registry.assets)} assets and {len(registry.edges)} edges from {journal_path}")
        registry.journal_path = journal_path
        return registry

    def _append_journal(self, record: Dict[str, Any]) -> None:
        if not self.journal_path:
            return
        directory = os.path.dirname(self.journal_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.journal_path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, sort_keys=True) + "\n")

    # ---------------------------------------------------------------- mutation
    def _store_asset(self, asset: DataAsset) -> None:
        self.assets[asset.guid] = asset
        self._parents.setdefault(asset.guid, [])
        self._children.setdefault(asset.guid, [])
        if asset.name:
            self._aliases[asset.name] = asset.guid
        self._filenames[asset.filename] = asset.guid

    def _store_edge(self, edge: LineageEdge) -> None:
        self.edges.append(edge)
        self._parents[edge.child].append(edge.parent)
        self._children[edge.parent].append(edge.child)

    def register_asset(self, descriptor: AssetDescriptor, guid: Optional[str] = None) -> str:
        """Register a descriptor and return its GUID text.

        ``guid`` lets a toolkit operation name its output file before registering;
        it must come from ``new_guid()`` and not be in use.
        """
        if not descriptor.uri:
            raise InvalidParameter("Asset uri must be non-empty")
        if not descriptor.schema_summary:
            raise InvalidParameter(f"Asset {descriptor.uri} has an empty schema summary")
        if len(descriptor.schema_summary) > MAX_SUMMARY_CHARS:
            raise SchemaTooLarge(
                f"Schema summary of {descriptor.uri} has {len(descriptor.schema_summary)} chars "
                f"(limit {MAX_SUMMARY_CHARS})"
            )
        extent = descriptor.geo_extent
        if extent is not None and not isinstance(extent, BoundingBox):
            extent = BoundingBox.from_list(extent)

        with self._lock:
            if guid is not None:
                guid = _guid_text(parse_guid(guid))
                if guid in self.assets:
                    raise InvalidParameter(f"GUID {guid} is already registered")
            else:
                guid = new_guid()
                while guid in self.assets:
                    guid = new_guid()
            asset = DataAsset(
                guid=guid,
                modality=Modality(descriptor.modality),
                uri=descriptor.uri,
                schema_summary=descriptor.schema_summary,
                geo_extent=extent,
                time_tag=descriptor.time_tag,
                name=descriptor.name,
                derived=descriptor.derived,
            )
            self._store_asset(asset)
            self._append_journal(asset.to_record())
        logger.info(f"Registered {asset.modality.value} asset {guid} ({asset.filename})")
        return guid

    def link_assets(self, parent: GuidLike, child: GuidLike, relation: str) -> LineageEdge:
        """Record ``parent -> child``; rejects edges that would close a cycle."""
        parent, child = _guid_text(parent), _guid_text(child)
        with self._lock:
            self.resolve(parent)
            self.resolve(child)
            if parent == child or child in self._ancestors(parent):
                raise CycleDetected(f"Linking {parent} -> {child} would create a cycle")
            edge = LineageEdge(parent, child, relation)
            if edge in self.edges:
                return edge
            self._store_edge(edge)
            self._append_journal(edge.to_record())
        logger.debug(f"Linked {parent} -> {child} ({relation})")
        return edge

    def derive(self, descriptor: AssetDescriptor, parents: Iterable[GuidLike], relation: str,
               payload: Any = None, guid: Optional[str] = None) -> str:
        """Register a derived asset and link it to each parent when alignment is on."""
        parents = [_guid_text(p) for p in parents]
        for parent in parents:
            self.resolve(parent)
        guid = self.register_asset(replace(descriptor, derived=True), guid=guid)
        if payload is not None:
            self.put_payload(guid, payload)
        if self.alignment:
            for parent in dict.fromkeys(parents):
                self.link_assets(parent, guid, relation)
        else:
            logger.debug(f"Alignment disabled; {guid} registered without lineage")
        return guid

    # ------------------------------------------------------------------ lookup
    def resolve(self, guid: GuidLike) -> DataAsset:
        key = _guid_text(guid)
        try:
            return self.assets[key]
        except KeyError:
            raise UnknownGuid(f"Unknown asset GUID: {key}")

    def find(self, ref: str) -> DataAsset:
        """Resolve GUID text, an alias, or a file name (latest registration wins)."""
        ref = str(ref).strip()
        key = ref.lower()
        if key in self.assets:
            return self.assets[key]
        if ref in self._aliases:
            return self.assets[self._aliases[ref]]
        base = os.path.basename(ref)
        if base in self._filenames:
            return self.assets[self._filenames[base]]
        raise UnknownGuid(f"No asset matches reference {ref!r}")

    def contains_filename(self, filename: str) -> bool:
        return os.path.basename(filename) in self._filenames

    def parents(self, guid: GuidLike) -> List[str]:
        return sorted(self._parents.get(self.resolve(guid).guid, []))

    def children(self, guid: GuidLike) -> List[str]:
        return sorted(self._children.get(self.resolve(guid).guid, []))

    def _ancestors(self, guid: str) -> set:
        seen = set()
        stack = [guid]
        while stack:
            node = stack.pop()
            for parent in self._parents.get(node, []):
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        return seen

    def trace_lineage(self, guid: GuidLike) -> List[str]:
        """Return ``guid`` and all its ancestors, self first and roots last.

        Every node precedes its parents; among ready nodes the smallest GUID
        text goes first, and roots are held back until the end.
        """
        start = self.resolve(guid).guid
        nodes = {start} | self._ancestors(start)
        pending = {
            node: sum(1 for child in self._children.get(node, []) if child in nodes)
            for node in nodes
        }
        ready = [start]
        roots = []
        order = []
        while ready:
            node = heapq.heappop(ready)
            if not self._parents.get(node) and node != start:
                roots.append(node)
                continue
            order.append(node)
            for parent in self._parents.get(node, []):
                pending[parent] -= 1
                if pending[parent] == 0:
                    heapq.heappush(ready, parent)
        return order + sorted(roots)

    def roots(self, guid: GuidLike) -> List[str]:
        return [g for g in self.trace_lineage(guid) if not self._parents.get(g)]

    def is_grounded(self, guid: GuidLike) -> bool:
        """True when every root ancestor is an ingested (non-derived) asset."""
        return all(not self.assets[root].derived for root in self.roots(guid))

    def list_assets(self, modality: Optional[Modality] = None) -> List[DataAsset]:
        assets = list(self.assets.values())
        if modality is not None:
            assets = [a for a in assets if a.modality == modality]
        return assets

    def __len__(self):
        return len(self.assets)

    def __contains__(self, guid):
        return _guid_text(guid) in self.assets

    # ----------------------------------------------------------------- payloads
    def put_payload(self, guid: GuidLike, payload: Any) -> None:
        self._payloads[_guid_text(guid)] = payload

    def payload(self, guid: GuidLike) -> Any:
        """Return the cached payload, re-reading it from the asset uri on a miss."""
        asset = self.resolve(guid)
        if asset.guid in self._payloads:
            return self._payloads[asset.guid]
        if self.loader is None:
            from src.data_loader import load_payload
            self.loader = load_payload
        payload = self.loader(asset)
        self._payloads[asset.guid] = payload
        return payload

    def output_path(self, guid_hint: str, extension: str) -> str:
        """Path for a derived file under the run directory."""
        directory = self.run_dir or os.path.join(os.getcwd(), "runs")
        os.makedirs(directory, exist_ok=True)
        return os.path.join(directory, f"{guid_hint}{extension}")
