"""Latency tracking for tool executions and provider calls."""
import threading
import time
from collections import defaultdict
from functools import wraps
from statistics import mean, median

from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class LatencyTracker:
    def __init__(self):
        self.response_times = defaultdict(list)
        self._lock = threading.Lock()

    def record_latency(self, name, latency):
        """Record a single latency measurement in seconds."""
        with self._lock:
            self.response_times[name].append(latency)

    def reset(self):
        with self._lock:
            self.response_times.clear()

    def get_statistics(self):
        """Calculate per-name latency statistics in milliseconds."""
        with self._lock:
            snapshot = {name: list(times) for name, times in self.response_times.items()}
        if not snapshot:
            return None

        stats = {}
        for name, times in sorted(snapshot.items()):
            stats[name] = {
                'avg_response_time': mean(times) * 1000,
                'median_response_time': median(times) * 1000,
                'min_response_time': min(times) * 1000,
                'max_response_time': max(times) * 1000,
                'total_calls': len(times),
            }
        return stats


# Initialize global tracker
latency_tracker = LatencyTracker()


def measure_latency(name=None):
    """Decorator to measure function execution time under ``name``."""
    def decorator(func):
        label = name or func.__name__

        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                execution_time = time.perf_counter() - start_time
                latency_tracker.record_latency(label, execution_time)
                logger.debug(f"{label} execution time: {execution_time*1000:.2f}ms")
        return wrapper
    return decorator
