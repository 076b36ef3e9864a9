"""Pearson correlation matrices for influential-factor analysis."""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.data_processor import ColumnKind, Table
from src.errors import InvalidParameter, TooFewObservations, ZeroVariance
from src.registry import AssetRegistry
from src.toolkit.tabular import load_table, register_table
from src.utils.latency_tracker import measure_latency
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

# |r| below the first cut is weak, below the second moderate, else strong
BAND_CUTS = (0.3, 0.6)


@dataclass
class CorrelationMatrix:
    variables: List[str]
    values: np.ndarray

    def r(self, a: str, b: str) -> float:
        return float(self.values[self.variables.index(a), self.variables.index(b)])

    def pairs(self) -> List[Tuple[str, str, float]]:
        n = len(self.variables)
        return [(self.variables[i], self.variables[j], float(self.values[i, j]))
                for i in range(n) for j in range(i + 1, n)]

    def to_table(self) -> Table:
        frame = pd.DataFrame(self.values, columns=self.variables)
        frame.insert(0, "variable", self.variables)
        kinds = {"variable": ColumnKind.TEXT, **{v: ColumnKind.NUMBER for v in self.variables}}
        return Table.from_frame(frame, kinds)


def correlation_band(r: float) -> str:
    """Describe a coefficient as weak / moderate / strong and positive / negative."""
    magnitude = abs(r)
    if magnitude < BAND_CUTS[0]:
        strength = "weak"
    elif magnitude < BAND_CUTS[1]:
        strength = "moderate"
    else:
        strength = "strong"
    return f"{strength} {'negative' if r < 0 else 'positive'}"


def _diagnose(frame: pd.DataFrame, a: str, b: str) -> None:
    both = frame[[a, b]].dropna()
    if len(both) < 2:
        raise TooFewObservations(f"Columns '{a}' and '{b}' share {len(both)} complete observations; need 2")
    for column in (a, b):
        if np.ptp(both[column].to_numpy(dtype=float)) == 0:
            raise ZeroVariance(column)


def correlation_of(table: Table, columns: Sequence[str]) -> CorrelationMatrix:
    """Pairwise-complete Pearson coefficients between numeric columns."""
    columns = list(dict.fromkeys(columns))
    if len(columns) < 2:
        raise InvalidParameter(f"pearson_matrix needs at least 2 distinct columns; got {columns}")
    for column in columns:
        table.require_number(column)
    frame = table.frame[columns].astype(float)
    for i, a in enumerate(columns):
        for b in columns[i + 1:]:
            _diagnose(frame, a, b)
    values = frame.corr(method="pearson", min_periods=2).to_numpy(dtype=float)
    values = np.clip((values + values.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return CorrelationMatrix(columns, values)


@measure_latency("pearson_matrix")
def pearson_matrix(registry: AssetRegistry, table: str, columns: Sequence[str],
                   name: Optional[str] = None) -> Tuple[str, CorrelationMatrix]:
    """Correlation matrix over ``columns``, also registered as a derived table."""
    guid, source = load_table(registry, table)
    matrix = correlation_of(source, columns)
    for a, b, r in matrix.pairs():
        logger.debug(f"r({a}, {b}) = {r:.6f} ({correlation_band(r)})")
    logger.info(f"pearson_matrix over {len(matrix.variables)} columns of {source.row_count} rows")
    return register_table(registry, matrix.to_table(), [guid], "correlate", name=name), matrix
