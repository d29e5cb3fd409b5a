import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpseg.core import (DataKind, Segmentation, TimeSeries, ValidationError, build_stats,
                        validate_segmentation)


def test_binary_series_from_text_values():
    ts = TimeSeries([0, 1, 1], DataKind.BINARY)
    assert ts.n == 3
    assert ts.values.dtype == np.int64


@pytest.mark.parametrize("values, kind, where", [
    ([0, 1, 2], "binary", "index 3"),
    ([1, -1, 2], "counts", "index 2"),
    ([1.0, 0.5], "counts", "index 2"),
    ([1.0, float("nan"), 2.0], "real", "index 2"),
])
def test_kind_violations_name_the_index(values, kind, where):
    with pytest.raises(ValidationError, match=where):
        TimeSeries(values, kind)


def test_too_short():
    with pytest.raises(ValidationError):
        TimeSeries([1.0], "real")


def test_segmentation_round_trip_and_bounds():
    seg = Segmentation((2, 5))
    z = seg.to_z(7)
    assert z.tolist() == [0, 1, 0, 0, 1, 0, 0]
    assert Segmentation.from_z(z) == seg
    assert seg.bounds(7) == [(1, 2), (3, 5), (6, 7)]
    assert Segmentation(()).bounds(4) == [(1, 4)]


@pytest.mark.parametrize("taus", [(0,), (7,), (3, 3), (4, 2), (-1,)])
def test_invalid_segmentations(taus):
    with pytest.raises(ValidationError):
        validate_segmentation(taus, 7)


def test_prefix_statistics_counts():
    stats = build_stats(TimeSeries([2, 0, 3, 1], "counts"))
    assert stats.segment_sum(1, 4) == 6
    assert stats.segment_sum(2, 3) == 3
    assert stats.segment_logfact(1, 4) == pytest.approx(np.log(2 * 6))
    with pytest.raises(IndexError):
        stats.segment_sum(0, 2)
    with pytest.raises(IndexError):
        stats.segment_sum(3, 2)


def test_real_prefix_sums_keep_precision_at_large_offset():
    # 1e8 offset with unit-scale variation: naive float cumsum would lose digits
    rng = np.random.default_rng(0)
    y = 1e8 + rng.normal(size=5000)
    stats = build_stats(TimeSeries(y, "real"))
    exact = np.sum(y[1000:4000] - 1e8) + 3000 * 1e8
    assert stats.segment_sum(1001, 4000) == pytest.approx(exact, rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40), st.data())
def test_segment_sums_match_direct(values, data):
    stats = build_stats(TimeSeries(values, "real"))
    n = len(values)
    s = data.draw(st.integers(1, n))
    t = data.draw(st.integers(s, n))
    seg = np.asarray(values[s - 1:t])
    assert stats.segment_sum(s, t) == pytest.approx(seg.sum(), abs=1e-9)
    assert stats.segment_sumsq(s, t) == pytest.approx((seg ** 2).sum(), rel=1e-12, abs=1e-9)
