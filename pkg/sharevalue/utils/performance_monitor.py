import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator, List

import psutil
from loguru import logger


@dataclass
class PerformanceMetric:
    """Data class for one timed pipeline stage"""
    stage: str
    seconds: float
    rss_mb: float
    tags: Dict[str, Any] = field(default_factory=dict)


class StageTimer:
    """
    Collects wall time and resident memory per pipeline stage.

    Metrics are logged, never written into reports.
    """

    def __init__(self):
        self.metrics: List[PerformanceMetric] = []
        self._process = psutil.Process()

    @contextmanager
    def track(self, stage: str, **tags: Any) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            rss_mb = self._process.memory_info().rss / (1024 * 1024)
            metric = PerformanceMetric(stage=stage, seconds=elapsed, rss_mb=rss_mb, tags=dict(tags))
            self.metrics.append(metric)
            logger.bind(stage=stage).debug("{} finished in {:.3f}s (rss {:.1f} MB)", stage, elapsed, rss_mb)

    @property
    def total_seconds(self) -> float:
        return sum(metric.seconds for metric in self.metrics)

    def summary(self) -> Dict[str, Any]:
        return {
            "total_seconds": self.total_seconds,
            "stages": [asdict(metric) for metric in self.metrics],
        }

    def log_summary(self) -> None:
        for metric in self.metrics:
            logger.info("stage {:<14} {:8.3f}s  rss {:8.1f} MB", metric.stage, metric.seconds, metric.rss_mb)
        logger.info("total {:.3f}s", self.total_seconds)
