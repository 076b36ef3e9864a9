"""Density-based clustering of point events and cluster-size analytics."""
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from sklearn.cluster import DBSCAN

from src.config import ANALYTICS_CONFIG
from src.data_processor import ColumnKind, Table
from src.errors import InvalidParameter, InvalidThresholds
from src.registry import AssetRegistry
from src.toolkit.tabular import load_table, register_table
from src.toolkit.vector import point_table
from src.utils.formatting import format_value, is_null
from src.utils.latency_tracker import measure_latency
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

NOISE = -1
LABEL_COLUMN = "cluster"
CATEGORIES = ("small", "medium", "large")


@dataclass
class ClusterLabeling:
    """Per-point cluster ids (noise is -1) with the parameters that produced them."""

    labels: np.ndarray
    eps: float
    min_pts: int

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) and self.labels.max() >= 0 else 0

    def sizes(self) -> Dict[int, int]:
        ids, counts = np.unique(self.labels[self.labels != NOISE], return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    @property
    def noise_count(self) -> int:
        return int(np.sum(self.labels == NOISE))


@dataclass
class ClusterCategories:
    small: int = 0
    medium: int = 0
    large: int = 0
    sizes: Dict[int, int] = field(default_factory=dict)
    categories: Dict[int, str] = field(default_factory=dict)

    def counts(self) -> Dict[str, int]:
        return {"small": self.small, "medium": self.medium, "large": self.large}


def dbscan_labels(xs, ys, eps: float, min_pts: int) -> ClusterLabeling:
    """Label points with classic density-based clustering.

    A point is core when at least ``min_pts`` points (itself included) lie
    within Euclidean distance ``eps``. Border points join the first cluster
    that reaches them in point-index order.
    """
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive; got {eps}")
    if int(min_pts) != min_pts or min_pts < 1:
        raise InvalidParameter(f"min_pts must be an integer >= 1; got {min_pts}")
    coords = np.column_stack([np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)])
    if len(coords) == 0:
        raise InvalidParameter("dbscan needs at least one point")
    if np.isnan(coords).any():
        raise InvalidParameter("dbscan points must not have null coordinates")
    model = DBSCAN(eps=eps, min_samples=int(min_pts), metric="euclidean", algorithm="brute")
    labels = model.fit_predict(coords).astype(int)
    return ClusterLabeling(labels, float(eps), int(min_pts))


@measure_latency("dbscan")
def dbscan(registry: AssetRegistry, points: str, eps: Optional[float] = None,
           min_pts: Optional[int] = None, name: Optional[str] = None) -> str:
    """Cluster a point table and register it with an added ``cluster`` column."""
    start_time = time.time()
    eps = ANALYTICS_CONFIG["eps"] if eps is None else float(eps)
    min_pts = ANALYTICS_CONFIG["min_pts"] if min_pts is None else min_pts
    guid, table, (lon, lat), _ = point_table(registry, points)
    logger.info(f"Starting dbscan on {table.row_count} points (eps={eps}, min_pts={min_pts})")
    labeling = dbscan_labels(table.frame[lon], table.frame[lat], eps, min_pts)

    column = LABEL_COLUMN if LABEL_COLUMN not in table.kinds else f"{LABEL_COLUMN}_r"
    frame = table.frame.copy()
    frame[column] = labeling.labels.astype(float)
    kinds = dict(table.kinds)
    kinds[column] = ColumnKind.NUMBER
    result = Table.from_frame(frame, kinds, dict(table.resolutions))
    logger.info(
        f"dbscan found {labeling.n_clusters} clusters and {labeling.noise_count} noise points "
        f"in {time.time() - start_time:.2f} seconds"
    )
    return register_table(registry, result, [guid], "cluster", name=name)


def _check_thresholds(small_max, medium_max) -> None:
    if not (0 < small_max < medium_max):
        raise InvalidThresholds(
            f"Cluster size thresholds need 0 < small_max < medium_max; got ({small_max}, {medium_max})"
        )


def category_of(size: int, small_max: int, medium_max: int) -> str:
    if size <= small_max:
        return "small"
    if size <= medium_max:
        return "medium"
    return "large"


def categorize_clusters(labeling: ClusterLabeling, small_max: Optional[int] = None,
                        medium_max: Optional[int] = None) -> ClusterCategories:
    """Bucket clusters by size; noise is excluded."""
    small_max = ANALYTICS_CONFIG["small_max"] if small_max is None else small_max
    medium_max = ANALYTICS_CONFIG["medium_max"] if medium_max is None else medium_max
    _check_thresholds(small_max, medium_max)
    result = ClusterCategories(sizes=labeling.sizes())
    for cluster, size in result.sizes.items():
        category = category_of(size, small_max, medium_max)
        result.categories[cluster] = category
        setattr(result, category, getattr(result, category) + 1)
    logger.debug(f"Cluster categories: {result.counts()}")
    return result


def labeling_of(table: Table, label_column: str = LABEL_COLUMN) -> ClusterLabeling:
    table.require_number(label_column)
    labels = table.frame[label_column].fillna(NOISE).to_numpy(dtype=float).astype(int)
    return ClusterLabeling(labels, float("nan"), 0)


def _dominant(values: List) -> Optional[str]:
    present = [v for v in values if not is_null(v)]
    if not present:
        return None
    counts = pd.Series(present, dtype=object).value_counts()
    best = counts.max()
    return sorted(str(v) for v, c in counts.items() if c == best)[0]


@measure_latency("summarize_clusters")
def summarize_clusters(registry: AssetRegistry, table: str, small_max: Optional[int] = None,
                       medium_max: Optional[int] = None, group_column: Optional[str] = None,
                       name: Optional[str] = None) -> str:
    """One row per cluster: size, size category and (optionally) its dominant group value."""
    guid, source = load_table(registry, table)
    column = LABEL_COLUMN if LABEL_COLUMN in source.kinds else f"{LABEL_COLUMN}_r"
    labeling = labeling_of(source, column)
    categories = categorize_clusters(labeling, small_max, medium_max)
    rows = {
        "cluster": [float(c) for c in categories.sizes],
        "size": [float(s) for s in categories.sizes.values()],
        "category": [categories.categories[c] for c in categories.sizes],
    }
    kinds = {"cluster": ColumnKind.NUMBER, "size": ColumnKind.NUMBER, "category": ColumnKind.TEXT}
    if group_column is not None:
        source.require(group_column)
        groups = [source.cell_text(group_column, v) if not is_null(v) else None
                  for v in source.frame[group_column]]
        rows[group_column] = [
            _dominant([g for g, label in zip(groups, labeling.labels) if label == cluster])
            for cluster in categories.sizes
        ]
        kinds[group_column] = ColumnKind.TEXT
    frame = pd.DataFrame(rows, columns=list(rows))
    logger.info(f"summarize_clusters: {categories.counts()} over {len(categories.sizes)} clusters")
    return register_table(registry, Table.from_frame(frame, kinds), [guid], "summarize", name=name)


def top_percentile_mask(values: pd.Series, percent: float) -> pd.Series:
    if not 0 < percent <= 100:
        raise InvalidParameter(f"percent must be in (0, 100]; got {percent}")
    present = values.dropna().to_numpy(dtype=float)
    if present.size == 0:
        raise InvalidParameter("Cannot take a percentile of an all-null column")
    cut = float(np.percentile(present, 100.0 - percent, method="linear"))
    return values.notna() & (values >= cut)


@measure_latency("select_top_percentile")
def select_top_percentile(registry: AssetRegistry, table: str, column: str,
                          percent: Optional[float] = None, name: Optional[str] = None) -> str:
    """Keep rows whose ``column`` is at or above the (100 - percent) percentile."""
    percent = ANALYTICS_CONFIG["top_percent"] if percent is None else float(percent)
    guid, source = load_table(registry, table)
    source.require_number(column)
    mask = top_percentile_mask(source.frame[column], percent)
    result = Table(source.frame[mask.to_numpy()].reset_index(drop=True), dict(source.kinds),
                   dict(source.resolutions))
    logger.info(f"select_top_percentile: kept {result.row_count} of {source.row_count} rows "
                f"(top {format_value(percent)}% of {column})")
    return register_table(registry, result, [guid], "filter", name=name)
