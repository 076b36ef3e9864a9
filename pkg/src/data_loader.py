"""Data loading utilities: ingest files into the asset registry and re-read payloads."""
import json
import os
from typing import Dict, List, Optional

from PIL import Image

from src.errors import DataError, InvalidParameter, ParseError
from src.registry import AssetRegistry, DataAsset, Modality
from src.toolkit.raster import parse_grid, read_ascii_grid
from src.toolkit.tabular import read_csv_table, read_table
from src.toolkit.vector import VECTOR_EXTENSIONS, parse_vector, read_features
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

TABLE_EXTENSIONS = (".csv",)
RASTER_EXTENSIONS = (".asc",)
IMAGE_EXTENSIONS = (".ppm", ".png")
MANIFEST_NAME = "manifest.json"

_MODALITY_BY_EXTENSION = {
    **{ext: Modality.TABLE for ext in TABLE_EXTENSIONS},
    **{ext: Modality.VECTOR for ext in VECTOR_EXTENSIONS},
    **{ext: Modality.RASTER for ext in RASTER_EXTENSIONS},
    **{ext: Modality.IMAGE for ext in IMAGE_EXTENSIONS},
}


def modality_of(path: str) -> Modality:
    extension = os.path.splitext(path)[1].lower()
    try:
        return _MODALITY_BY_EXTENSION[extension]
    except KeyError:
        raise InvalidParameter(f"Unsupported file type '{extension}' for {os.path.basename(path)}")


def load_payload(asset: DataAsset):
    """Re-read the payload of a registered asset from its uri."""
    logger.debug(f"Loading payload for {asset.filename}")
    if asset.modality == Modality.TABLE:
        return read_csv_table(asset.uri)
    if asset.modality == Modality.VECTOR:
        return read_features(asset.uri)
    if asset.modality == Modality.RASTER:
        return read_ascii_grid(asset.uri)
    with Image.open(asset.uri) as image:
        return image.convert("RGB")


def ingest(path: str, registry: AssetRegistry, name: Optional[str] = None,
           time_tag: Optional[str] = None) -> str:
    """Register one data file as a root asset; returns its GUID."""
    try:
        logger.info(f"Starting ingestion of {path}")
        if not os.path.exists(path):
            raise ParseError(f"File not found: {path}")
        modality = modality_of(path)
        if modality == Modality.TABLE:
            guid = read_table(path, registry, name=name, time_tag=time_tag)
        elif modality == Modality.VECTOR:
            guid = parse_vector(path, registry, name=name, time_tag=time_tag)
        elif modality == Modality.RASTER:
            guid = parse_grid(path, registry, name=name, time_tag=time_tag)
        else:
            raise InvalidParameter(f"Images are rendered outputs and cannot be ingested: {os.path.basename(path)}")
        logger.info(f"Ingested {os.path.basename(path)} as {modality.value} {guid}")
        return guid
    except DataError as e:
        logger.error(f"Error ingesting {path}: {str(e)}", exc_info=True)
        raise


def read_manifest(directory: str) -> List[Dict[str, str]]:
    path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(path):
        raise ParseError(f"No {MANIFEST_NAME} in {directory}")
    with open(path, "r", encoding="utf-8") as handle:
        try:
            manifest = json.load(handle)
        except json.JSONDecodeError as e:
            raise ParseError(f"{MANIFEST_NAME}: not valid JSON ({e})")
    entries = manifest.get("assets", []) if isinstance(manifest, dict) else manifest
    for entry in entries:
        if "file" not in entry:
            raise ParseError(f"{MANIFEST_NAME}: entry without a file: {entry}")
    return entries


def ingest_manifest(directory: str, registry: AssetRegistry) -> Dict[str, str]:
    """Ingest every file listed in ``manifest.json``; returns alias -> GUID."""
    logger.info(f"Ingesting manifest in {directory}")
    ingested = {}
    for entry in read_manifest(directory):
        alias = entry.get("alias") or os.path.splitext(entry["file"])[0]
        guid = ingest(os.path.join(directory, entry["file"]), registry,
                      name=alias, time_tag=entry.get("time_tag"))
        ingested[alias] = guid
    logger.info(f"Ingested {len(ingested)} assets from {directory}")
    return ingested


def ingest_path(path: str, registry: AssetRegistry) -> Dict[str, str]:
    """Ingest a manifest directory, a plain directory, or a single file."""
    if os.path.isdir(path):
        if os.path.exists(os.path.join(path, MANIFEST_NAME)):
            return ingest_manifest(path, registry)
        ingested = {}
        for entry in sorted(os.listdir(path)):
            extension = os.path.splitext(entry)[1].lower()
            if extension in _MODALITY_BY_EXTENSION and _MODALITY_BY_EXTENSION[extension] != Modality.IMAGE:
                if extension == ".json":
                    continue
                alias = os.path.splitext(entry)[0]
                ingested[alias] = ingest(os.path.join(path, entry), registry, name=alias)
        return ingested
    alias = os.path.splitext(os.path.basename(path))[0]
    return {alias: ingest(path, registry, name=alias)}
