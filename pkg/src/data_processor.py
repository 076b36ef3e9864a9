"""Typed tables: column type inference, literal coercion and text rendering."""
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import TypeMismatch, UnknownColumn
from src.utils.formatting import format_value, is_null
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

YEAR_MIN, YEAR_MAX = 1800, 2199
SUMMARY_LIMIT = 2048

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_YEAR = r"\d{4}"
_MONTH = r"\d{4}-\d{2}"
_DATE = r"\d{4}-\d{2}-\d{2}"
_BOOLEAN = {"true", "false"}


class ColumnKind(str, Enum):
    TEXT = "Text"
    NUMBER = "Number"
    TIMESTAMP = "Timestamp"
    BOOLEAN = "Boolean"


# Timestamp resolutions, coarsest first
RESOLUTIONS = ("year", "month", "date")


def _all_match(values: pd.Series, pattern: str) -> bool:
    return bool(values.str.fullmatch(pattern).all())


def _to_timestamps(values: pd.Series, resolution: str) -> pd.Series:
    if resolution == "year":
        return pd.to_datetime(values + "-01-01", format="%Y-%m-%d")
    if resolution == "month":
        return pd.to_datetime(values + "-01", format="%Y-%m-%d")
    return pd.to_datetime(values, format="%Y-%m-%d")


def infer_column(raw: pd.Series) -> Tuple[ColumnKind, Optional[str], pd.Series]:
    """Infer the kind of a column of raw strings and convert it.

    Empty cells are Null. Rules in order: bare years, numbers, ISO dates or
    months, booleans, text. A column with no rows at all is Number; one whose
    rows are all empty is Text.
    """
    if len(raw) == 0:
        return ColumnKind.NUMBER, None, pd.Series([], index=raw.index, dtype=float)
    raw = raw.astype(object).where(raw.notna(), "")
    present = raw[raw != ""].astype(str)
    nulls = raw == ""
    if present.empty:
        return ColumnKind.TEXT, None, pd.Series([None] * len(raw), index=raw.index, dtype=object)

    if _all_match(present, _YEAR):
        years = present.astype(int)
        if years.between(YEAR_MIN, YEAR_MAX).all():
            converted = pd.Series(pd.NaT, index=raw.index, dtype="datetime64[ns]")
            converted[~nulls] = _to_timestamps(present, "year")
            return ColumnKind.TIMESTAMP, "year", converted

    if _all_match(present, _NUMBER):
        converted = pd.to_numeric(raw.where(~nulls, None), errors="coerce").astype(float)
        return ColumnKind.NUMBER, None, converted

    for resolution, pattern in (("month", _MONTH), ("date", _DATE)):
        if _all_match(present, pattern):
            try:
                parsed = _to_timestamps(present, resolution)
            except (ValueError, OverflowError):
                break
            converted = pd.Series(pd.NaT, index=raw.index, dtype="datetime64[ns]")
            converted[~nulls] = parsed
            return ColumnKind.TIMESTAMP, resolution, converted

    lowered = present.str.lower()
    if lowered.isin(_BOOLEAN).all():
        converted = pd.Series([None] * len(raw), index=raw.index, dtype=object)
        converted[~nulls] = (lowered == "true").tolist()
        return ColumnKind.BOOLEAN, None, converted

    converted = raw.where(~nulls, None).astype(object)
    return ColumnKind.TEXT, None, converted


def literal_resolution(text: str) -> Optional[str]:
    """Granularity of a timestamp literal, or None when it is not one."""
    text = str(text).strip()
    if re.fullmatch(_YEAR, text):
        return "year"
    if re.fullmatch(_MONTH, text):
        return "month"
    if re.fullmatch(_DATE, text):
        return "date"
    return None


def coerce_literal(kind: ColumnKind, literal, column: str):
    """Convert a filter literal to the column's kind, raising TypeMismatch."""
    if literal is None:
        return None
    if kind == ColumnKind.NUMBER:
        if isinstance(literal, bool):
            raise TypeMismatch(f"Column '{column}' is Number; got boolean literal {literal!r}")
        try:
            return float(literal)
        except (TypeError, ValueError):
            raise TypeMismatch(f"Column '{column}' is Number; literal {literal!r} is not numeric")
    if kind == ColumnKind.TIMESTAMP:
        text = str(int(literal)) if isinstance(literal, (int, float)) and not isinstance(literal, bool) else str(literal)
        resolution = literal_resolution(text)
        if resolution is None:
            raise TypeMismatch(f"Column '{column}' is Timestamp; literal {literal!r} is not a year or ISO date")
        return _to_timestamps(pd.Series([text]), resolution).iloc[0], resolution
    if kind == ColumnKind.BOOLEAN:
        if isinstance(literal, bool):
            return literal
        text = str(literal).strip().lower()
        if text not in _BOOLEAN:
            raise TypeMismatch(f"Column '{column}' is Boolean; literal {literal!r} is not true/false")
        return text == "true"
    return str(literal)


def _kind_of_dtype(series: pd.Series) -> ColumnKind:
    if pd.api.types.is_bool_dtype(series):
        return ColumnKind.BOOLEAN
    if pd.api.types.is_numeric_dtype(series):
        return ColumnKind.NUMBER
    if pd.api.types.is_datetime64_any_dtype(series):
        return ColumnKind.TIMESTAMP
    present = [v for v in series if not is_null(v)]
    if present and all(isinstance(v, (bool, np.bool_)) for v in present):
        return ColumnKind.BOOLEAN
    return ColumnKind.TEXT


@dataclass
class Table:
    """A pandas frame plus the declared kind of every column.

    Number columns are float with NaN nulls, Timestamp columns datetime64
    with NaT, Boolean and Text columns object with None.
    """

    frame: pd.DataFrame
    kinds: Dict[str, ColumnKind]
    resolutions: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        names = list(self.frame.columns)
        if len(set(names)) != len(names):
            raise TypeMismatch(f"Duplicate column names: {names}")
        self.frame = self.frame.reset_index(drop=True)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, kinds: Optional[Dict[str, ColumnKind]] = None,
                   resolutions: Optional[Dict[str, str]] = None) -> "Table":
        """Wrap a frame, taking known kinds and inferring the rest from dtypes."""
        kinds = dict(kinds or {})
        resolutions = dict(resolutions or {})
        frame = frame.copy()
        for column in frame.columns:
            if column not in kinds:
                kinds[column] = _kind_of_dtype(frame[column])
            if kinds[column] == ColumnKind.NUMBER:
                frame[column] = pd.to_numeric(frame[column], errors="coerce").astype(float)
            elif kinds[column] in (ColumnKind.TEXT, ColumnKind.BOOLEAN):
                frame[column] = frame[column].astype(object).where(frame[column].notna(), None)
            elif kinds[column] == ColumnKind.TIMESTAMP:
                resolutions.setdefault(column, "date")
        kinds = {c: kinds[c] for c in frame.columns}
        resolutions = {c: r for c, r in resolutions.items() if c in kinds and kinds[c] == ColumnKind.TIMESTAMP}
        return cls(frame, kinds, resolutions)

    @classmethod
    def from_strings(cls, header: Sequence[str], rows: Sequence[Sequence[str]]) -> "Table":
        raw = pd.DataFrame(list(rows), columns=list(header), dtype=object)
        kinds, resolutions, columns = {}, {}, {}
        for name in header:
            kind, resolution, converted = infer_column(raw[name] if len(raw) else pd.Series([], dtype=object))
            kinds[name] = kind
            columns[name] = converted
            if resolution:
                resolutions[name] = resolution
        frame = pd.DataFrame(columns, columns=list(header))
        return cls(frame, kinds, resolutions)

    @property
    def columns(self) -> List[str]:
        return list(self.frame.columns)

    @property
    def row_count(self) -> int:
        return len(self.frame)

    def kind(self, column: str) -> ColumnKind:
        if column not in self.kinds:
            raise UnknownColumn(f"Unknown column '{column}'; available: {', '.join(self.columns)}")
        return self.kinds[column]

    def require(self, *columns: str) -> None:
        for column in columns:
            self.kind(column)

    def require_number(self, column: str) -> None:
        if self.kind(column) != ColumnKind.NUMBER:
            raise TypeMismatch(f"Column '{column}' is {self.kinds[column].value}, expected Number")

    def type_label(self, column: str) -> str:
        kind = self.kinds[column]
        if kind == ColumnKind.TIMESTAMP:
            return f"Timestamp[{self.resolutions.get(column, 'date')}]"
        return kind.value

    def schema_summary(self, limit: int = SUMMARY_LIMIT) -> str:
        """Column names with types and the row count, bounded by ``limit`` characters."""
        tail = f"; rows: {self.row_count}"
        parts = [f"{c} ({self.type_label(c)})" for c in self.columns]
        text = "columns: " + ", ".join(parts) + tail
        while len(text) > limit and parts:
            parts.pop()
            text = "columns: " + ", ".join(parts) + f", ... (+{len(self.columns) - len(parts)} more)" + tail
        return text

    def cell_text(self, column: str, value) -> str:
        return format_value(value, self.resolutions.get(column))

    def row_texts(self, max_rows: Optional[int] = None) -> List[List[str]]:
        frame = self.frame if max_rows is None else self.frame.head(max_rows)
        return [
            [self.cell_text(c, v) for c, v in zip(self.columns, row)]
            for row in frame.itertuples(index=False, name=None)
        ]

    def to_text(self, max_rows: Optional[int] = None) -> str:
        """Comma-separated rendering for prompts and observations."""
        lines = [",".join(self.columns)]
        lines.extend(",".join(cells) for cells in self.row_texts(max_rows))
        if max_rows is not None and self.row_count > max_rows:
            lines.append(f"... ({self.row_count - max_rows} more rows)")
        return "\n".join(lines)

    def serialize_cell(self, column: str, value) -> str:
        """Lossless cell text for CSV files; empty for Null."""
        if is_null(value):
            return ""
        kind = self.kinds[column]
        if kind == ColumnKind.NUMBER:
            value = float(value)
            return str(int(value)) if value.is_integer() and abs(value) < 1e15 else repr(value)
        return format_value(value, self.resolutions.get(column))

    def to_csv(self, path: str) -> None:
        out = pd.DataFrame(
            {c: [self.serialize_cell(c, v) for v in self.frame[c]] for c in self.columns},
            columns=self.columns,
        )
        out.to_csv(path, index=False, lineterminator="\n")
        logger.debug(f"Wrote {self.row_count} rows to {path}")

    def records(self) -> List[Dict[str, object]]:
        return [dict(zip(self.columns, row)) for row in self.frame.itertuples(index=False, name=None)]
