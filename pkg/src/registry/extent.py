"""Geographic extents and time ranges attached to data assets."""
import calendar
import re
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Optional, Tuple

from src.errors import InvalidExtent, InvalidParameter

_YEAR = re.compile(r"^\d{4}$")
_MONTH = re.compile(r"^(\d{4})-(\d{1,2})$")
_DAY = re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})$")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in decimal degrees."""

    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float

    def __post_init__(self):
        if self.min_lon > self.max_lon or self.min_lat > self.max_lat:
            raise InvalidExtent(
                f"Invalid extent: min must not exceed max ({self.min_lon}, {self.min_lat}, "
                f"{self.max_lon}, {self.max_lat})"
            )

    @classmethod
    def from_points(cls, xs: Iterable[float], ys: Iterable[float]) -> Optional["BoundingBox"]:
        xs, ys = list(xs), list(ys)
        if not xs:
            return None
        return cls(min(xs), min(ys), max(xs), max(ys))

    @classmethod
    def from_list(cls, values) -> Optional["BoundingBox"]:
        if values is None:
            return None
        return cls(*[float(v) for v in values])

    def as_list(self):
        return [self.min_lon, self.min_lat, self.max_lon, self.max_lat]

    @property
    def width(self) -> float:
        return self.max_lon - self.min_lon

    @property
    def height(self) -> float:
        return self.max_lat - self.min_lat

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.min_lon + self.max_lon) / 2.0, (self.min_lat + self.max_lat) / 2.0)

    def intersects(self, other: "BoundingBox") -> bool:
        return not (
            other.min_lon > self.max_lon
            or other.max_lon < self.min_lon
            or other.min_lat > self.max_lat
            or other.max_lat < self.min_lat
        )

    def union(self, other: "BoundingBox") -> "BoundingBox":
        return BoundingBox(
            min(self.min_lon, other.min_lon),
            min(self.min_lat, other.min_lat),
            max(self.max_lon, other.max_lon),
            max(self.max_lat, other.max_lat),
        )

    def padded(self, fraction: float) -> "BoundingBox":
        dx = self.width * fraction or fraction * 0.01
        dy = self.height * fraction or fraction * 0.01
        return BoundingBox(self.min_lon - dx, self.min_lat - dy, self.max_lon + dx, self.max_lat + dy)

    def __str__(self):
        return f"({self.min_lon:.6f}, {self.min_lat:.6f}, {self.max_lon:.6f}, {self.max_lat:.6f})"


def _parse_point_in_time(text: str) -> Tuple[date, date]:
    text = text.strip()
    if _YEAR.match(text):
        year = int(text)
        return date(year, 1, 1), date(year, 12, 31)
    match = _MONTH.match(text)
    if match:
        year, month = int(match.group(1)), int(match.group(2))
        last = calendar.monthrange(year, month)[1]
        return date(year, month, 1), date(year, month, last)
    match = _DAY.match(text)
    if match:
        day = date(int(match.group(1)), int(match.group(2)), int(match.group(3)))
        return day, day
    raise InvalidParameter(f"Unrecognised time value: {text!r}")


@dataclass(frozen=True)
class TimeRange:
    """Closed interval of calendar days."""

    start: date
    end: date

    def __post_init__(self):
        if self.start > self.end:
            raise InvalidParameter(f"Time range start {self.start} is after end {self.end}")

    @classmethod
    def parse(cls, text: str) -> "TimeRange":
        """Parse ``YYYY``, ``YYYY-MM``, ``YYYY-MM-DD`` or an interval ``a/b``."""
        if "/" in text:
            left, right = text.split("/", 1)
            return cls(_parse_point_in_time(left)[0], _parse_point_in_time(right)[1])
        start, end = _parse_point_in_time(text)
        return cls(start, end)

    @classmethod
    def years(cls, first: int, last: int) -> "TimeRange":
        return cls(date(first, 1, 1), date(last, 12, 31))

    @property
    def year_span(self) -> Tuple[int, int]:
        return self.start.year, self.end.year

    def intersects(self, other: "TimeRange") -> bool:
        return self.start <= other.end and other.start <= self.end

    def __str__(self):
        first, last = self.year_span
        if self.start == date(first, 1, 1) and self.end == date(last, 12, 31):
            return str(first) if first == last else f"{first}-{last}"
        return f"{self.start.isoformat()}/{self.end.isoformat()}"
