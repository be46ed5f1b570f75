"""
Test cases for the streaming moment accumulator
"""

import math

import numpy as np
import pytest
from scipy import stats

from sharevalue.utils.moments import MomentAccumulator


class TestMomentAccumulator:

    def setup_method(self):
        rng = np.random.default_rng(99)
        self.values = rng.gamma(shape=2.0, scale=0.3, size=5003) - 0.4

    @pytest.mark.parametrize("chunk_size", [1, 7, 1024, 10000])
    def test_matches_two_pass(self, chunk_size):
        acc = MomentAccumulator().update(self.values, chunk_size=chunk_size)
        assert acc.n == self.values.size
        assert acc.mean == pytest.approx(self.values.mean(), rel=1e-10)
        assert acc.std_dev == pytest.approx(self.values.std(ddof=1), rel=1e-10)
        assert acc.skewness == pytest.approx(stats.skew(self.values), rel=1e-10)
        assert acc.raw_kurtosis == pytest.approx(stats.kurtosis(self.values, fisher=False), rel=1e-10)
        assert acc.excess_kurtosis == pytest.approx(stats.kurtosis(self.values), rel=1e-10)

    def test_merge_is_order_free(self):
        left = MomentAccumulator().update(self.values[:1234])
        right = MomentAccumulator().update(self.values[1234:])
        forward = MomentAccumulator().merge(left).merge(right)
        backward = MomentAccumulator().merge(right).merge(left)
        for attribute in ("mean", "m2", "m3", "m4"):
            assert getattr(forward, attribute) == pytest.approx(getattr(backward, attribute), rel=1e-10)

    def test_large_offset_is_stable(self):
        shifted = self.values + 1e8
        acc = MomentAccumulator().update(shifted, chunk_size=64)
        assert acc.std_dev == pytest.approx(self.values.std(ddof=1), rel=1e-6)

    def test_symmetric_sample(self):
        acc = MomentAccumulator().update([-1.0, 0.0, 1.0])
        assert acc.skewness == pytest.approx(0.0, abs=1e-15)
        assert acc.std_dev == pytest.approx(1.0)
        assert acc.raw_kurtosis == pytest.approx(1.5)

    def test_degenerate_inputs(self):
        empty = MomentAccumulator()
        assert math.isnan(empty.central_moment(2))
        single = MomentAccumulator().update([2.5])
        assert math.isnan(single.std_dev)
        constant = MomentAccumulator().update([3.0] * 10)
        assert constant.skewness is None
        assert constant.excess_kurtosis is None
