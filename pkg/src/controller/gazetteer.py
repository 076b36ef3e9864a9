"""Place-name gazetteer: names and aliases mapped to bounding boxes."""
import os
import re
from dataclasses import dataclass
from typing import Dict, List, Optional

import pandas as pd

from src.errors import ParseError
from src.registry import BoundingBox
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

GAZETTEER_COLUMNS = ["name", "min_lon", "min_lat", "max_lon", "max_lat"]


@dataclass(frozen=True)
class Place:
    name: str
    bbox: Optional[BoundingBox] = None


class Gazetteer:
    """Case-insensitive exact lookup of configured places, plus aliases."""

    def __init__(self, places: Optional[List[Place]] = None, aliases: Optional[Dict[str, str]] = None):
        self.places: Dict[str, Place] = {}
        for place in places or []:
            self.places[place.name.lower()] = place
        self.aliases = {k.lower(): v for k, v in (aliases or {}).items()}

    @classmethod
    def load(cls, path: str, aliases: Optional[Dict[str, str]] = None) -> "Gazetteer":
        """Read ``name, min_lon, min_lat, max_lon, max_lat`` records, one per line."""
        if not os.path.exists(path):
            raise ParseError(f"Gazetteer file not found: {path}")
        try:
            frame = pd.read_csv(path, header=None, names=GAZETTEER_COLUMNS, comment="#",
                                skipinitialspace=True, dtype={"name": str})
            places = [
                Place(row.name.strip(), BoundingBox(row.min_lon, row.min_lat, row.max_lon, row.max_lat))
                for row in frame.itertuples(index=False)
            ]
        except (ValueError, pd.errors.ParserError) as e:
            raise ParseError(f"{os.path.basename(path)}: malformed gazetteer record ({e})")
        logger.info(f"Loaded {len(places)} places from {os.path.basename(path)}")
        return cls(places, aliases)

    def __len__(self):
        return len(self.places)

    def get(self, name: str) -> Optional[Place]:
        key = name.strip().lower()
        key = self.aliases.get(key, key).lower()
        return self.places.get(key)

    def _mentions(self, text: str, name: str) -> bool:
        return re.search(rf"(?<!\w){re.escape(name)}(?!\w)", text, re.IGNORECASE) is not None

    def lookup(self, text: str) -> Optional[Place]:
        """The most specific place mentioned in ``text`` (smallest box wins)."""
        found = {key: place for key, place in self.places.items() if self._mentions(text, key)}
        for alias, target in self.aliases.items():
            place = self.places.get(target.lower())
            if place is not None and self._mentions(text, alias):
                found[place.name.lower()] = place
        if not found:
            return None
        ranked = sorted(found.values(), key=lambda p: (p.bbox.area if p.bbox else float("inf"), p.name))
        return ranked[0]
