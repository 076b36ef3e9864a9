"""Line-delimited JSON trace of agent events."""
import hashlib
import json
import os
import threading
import time
from typing import Any, Dict, List, Optional


def digest(text: str) -> str:
    return hashlib.sha256((text or "").encode("utf-8")).hexdigest()[:16]


class TraceWriter:
    """Appends one JSON object per event; keeps them in memory as well."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.events: List[Dict[str, Any]] = []
        self._lock = threading.Lock()
        if path:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)

    def event(self, kind: str, **fields) -> Dict[str, Any]:
        record = {"event": kind, "ts": round(time.time(), 3), **fields}
        with self._lock:
            self.events.append(record)
            if self.path:
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record, sort_keys=True, default=str) + "\n")
        return record

    def of_kind(self, kind: str) -> List[Dict[str, Any]]:
        return [e for e in self.events if e["event"] == kind]
