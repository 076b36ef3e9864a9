from src.registry.asset_registry import (
    AssetDescriptor,
    AssetRegistry,
    DataAsset,
    LineageEdge,
    Modality,
    new_guid,
    parse_guid,
    render_guid,
)
from src.registry.extent import BoundingBox, TimeRange

__all__ = [
    "AssetDescriptor",
    "AssetRegistry",
    "BoundingBox",
    "DataAsset",
    "LineageEdge",
    "Modality",
    "TimeRange",
    "new_guid",
    "parse_guid",
    "render_guid",
]
