"""
Streaming central moments.

Values are consumed in chunks; each chunk's central sums are computed in one
vectorized two-pass step and merged into the running totals with the
pairwise update formulas, so large years never need a second full pass.
"""

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from sharevalue.config import MOMENT_CHUNK_SIZE


@dataclass
class MomentAccumulator:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0  # sum of squared deviations
    m3: float = 0.0
    m4: float = 0.0

    def update(self, values: Iterable[float], chunk_size: int = MOMENT_CHUNK_SIZE) -> "MomentAccumulator":
        data = np.asarray(values, dtype=float).ravel()
        for start in range(0, data.size, chunk_size):
            chunk = data[start:start + chunk_size]
            self.merge(MomentAccumulator._from_chunk(chunk))
        return self

    @staticmethod
    def _from_chunk(chunk: np.ndarray) -> "MomentAccumulator":
        mean = float(chunk.mean())
        dev = chunk - mean
        dev2 = dev * dev
        return MomentAccumulator(
            n=int(chunk.size),
            mean=mean,
            m2=float(dev2.sum()),
            m3=float((dev2 * dev).sum()),
            m4=float((dev2 * dev2).sum()),
        )

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2, self.m3, self.m4 = other.n, other.mean, other.m2, other.m3, other.m4
            return self

        na, nb = float(self.n), float(other.n)
        n = na + nb
        delta = other.mean - self.mean
        delta2 = delta * delta

        m2 = self.m2 + other.m2 + delta2 * na * nb / n
        m3 = (
            self.m3 + other.m3
            + delta2 * delta * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n
        )
        m4 = (
            self.m4 + other.m4
            + delta2 * delta2 * na * nb * (na * na - na * nb + nb * nb) / (n ** 3)
            + 6.0 * delta2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n
        )

        self.mean = self.mean + delta * nb / n
        self.n = int(n)
        self.m2, self.m3, self.m4 = m2, m3, m4
        return self

    # Population (n-denominator) central moments
    def central_moment(self, order: int) -> float:
        if self.n == 0:
            return float("nan")
        return {2: self.m2, 3: self.m3, 4: self.m4}[order] / self.n

    @property
    def std_dev(self) -> float:
        if self.n < 2:
            return float("nan")
        return float(np.sqrt(self.m2 / (self.n - 1)))

    @property
    def skewness(self) -> Optional[float]:
        var = self.central_moment(2)
        if not var > 0:
            return None
        return self.central_moment(3) / var ** 1.5

    @property
    def raw_kurtosis(self) -> Optional[float]:
        var = self.central_moment(2)
        if not var > 0:
            return None
        return self.central_moment(4) / (var * var)

    @property
    def excess_kurtosis(self) -> Optional[float]:
        kurt = self.raw_kurtosis
        return None if kurt is None else kurt - 3.0
