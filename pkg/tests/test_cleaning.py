import numpy as np
import pytest

from wearalign_core.data.cleaning import (
    NULL_LABEL,
    ChannelStats,
    FrameSequence,
    clean_frames,
    compute_channel_stats,
    normalize_array,
    normalize_channels,
)
from wearalign_core.data.layouts import SensorLayout, contiguous_layout
from wearalign_core.utils.errors import ChannelAllInvalid, MissingStats, ShapeMismatch


def _seq(frames, user="u1"):
    frames = np.asarray(frames, dtype=np.float64)
    return FrameSequence(frames=frames, labels=np.zeros(len(frames), dtype=np.int64),
                         user_id=user, sampling_rate_hz=10.0)


def test_interior_gap_is_linearly_interpolated():
    layout = contiguous_layout([1], 10.0)
    out = clean_frames(_seq([[1.0], [np.nan], [3.0]]), layout)
    assert out.frames[:, 0].tolist() == [1.0, 2.0, 3.0]


def test_edge_gaps_take_nearest_valid_value():
    layout = contiguous_layout([1], 10.0)
    out = clean_frames(_seq([[np.nan], [np.nan], [4.0], [6.0], [np.inf]]), layout)
    assert out.frames[:, 0].tolist() == [4.0, 4.0, 4.0, 6.0, 6.0]


def test_layout_sentinel_values_are_treated_as_missing():
    layout = contiguous_layout([1], 10.0)
    layout = SensorLayout(sensors=layout.sensors, sampling_rate_hz=10.0, invalid_values=(-999.0,))
    out = clean_frames(_seq([[0.0], [-999.0], [2.0]]), layout)
    assert out.frames[1, 0] == pytest.approx(1.0)


def test_channel_with_one_valid_value_is_rejected():
    layout = contiguous_layout([2], 10.0)
    with pytest.raises(ChannelAllInvalid) as e:
        clean_frames(_seq([[1.0, np.nan], [2.0, 5.0], [3.0, np.nan]]), layout)
    assert e.value.channel == 1


def test_channel_count_must_match_layout():
    with pytest.raises(ShapeMismatch):
        clean_frames(_seq([[1.0, 2.0]]), contiguous_layout([3], 10.0))


def test_clean_is_noop_on_finite_input():
    frames = np.random.default_rng(1).normal(size=(20, 3))
    out = clean_frames(_seq(frames), contiguous_layout([3], 10.0))
    np.testing.assert_array_equal(out.frames, frames)


def test_normalize_bounds_and_midpoint():
    stats = ChannelStats(np.array([0.0]), np.array([10.0]))
    out = normalize_array(np.array([[0.0], [10.0], [5.0]]), stats)
    assert out[:, 0].tolist() == [-1.0, 1.0, 0.0]


def test_normalize_clamps_values_outside_the_stats_range():
    stats = ChannelStats(np.array([0.0]), np.array([1.0]))
    out = normalize_array(np.array([[-3.0], [7.0]]), stats)
    assert out[:, 0].tolist() == [-1.0, 1.0]


def test_degenerate_channel_maps_to_zero():
    seqs = [_seq([[2.0, 1.0], [2.0, 3.0]])]
    stats = compute_channel_stats(seqs)
    assert stats.degenerate.tolist() == [True, False]
    out = normalize_channels(seqs[0], stats)
    assert out.frames[:, 0].tolist() == [0.0, 0.0]


def test_normalize_round_trip_recovers_inputs():
    rng = np.random.default_rng(7)
    seqs = [_seq(rng.normal(3.0, 2.0, size=(50, 4))), _seq(rng.normal(-1.0, 5.0, size=(30, 4)), "u2")]
    stats = compute_channel_stats(seqs)
    for s in seqs:
        out = normalize_channels(s, stats).frames
        assert out.min() >= -1.0 and out.max() <= 1.0
        np.testing.assert_allclose(stats.invert(out), s.frames, atol=1e-9)


def test_stats_cover_every_sequence():
    stats = compute_channel_stats([_seq([[1.0], [2.0]]), _seq([[-4.0], [0.5]], "u2")])
    assert stats.minimum.tolist() == [-4.0]
    assert stats.maximum.tolist() == [2.0]


def test_stats_channel_count_is_checked():
    stats = ChannelStats(np.zeros(2), np.ones(2))
    with pytest.raises(MissingStats):
        normalize_array(np.zeros((4, 3)), stats)


def test_stats_mapping_round_trip():
    stats = ChannelStats(np.array([-1.5, 0.0]), np.array([2.0, 0.0]))
    again = ChannelStats.from_mapping(stats.to_mapping())
    np.testing.assert_array_equal(again.minimum, stats.minimum)
    np.testing.assert_array_equal(again.maximum, stats.maximum)


def test_frame_sequence_shape_checks():
    with pytest.raises(ShapeMismatch):
        FrameSequence(np.zeros((3, 2)), np.full(2, NULL_LABEL), "u", 1.0)


def _interpolation_oracle(column, invalid):
    valid = [i for i in range(len(column)) if not invalid[i]]
    out = column.copy()
    for i in np.flatnonzero(invalid):
        before = [j for j in valid if j < i]
        after = [j for j in valid if j > i]
        if not before:
            out[i] = column[after[0]]
        elif not after:
            out[i] = column[before[-1]]
        else:
            p, n = before[-1], after[0]
            out[i] = column[p] + (column[n] - column[p]) * (i - p) / (n - p)
    return out


def test_random_gaps_match_two_point_interpolation():
    rng = np.random.default_rng(5)
    for _ in range(500):
        n_frames, n_channels = int(rng.integers(2, 40)), int(rng.integers(1, 5))
        clean = rng.normal(size=(n_frames, n_channels))
        invalid = rng.random((n_frames, n_channels)) < rng.uniform(0.0, 0.7)
        for c in range(n_channels):
            keep = rng.choice(n_frames, size=2, replace=False)
            invalid[keep, c] = False
        raw = clean.copy()
        raw[invalid] = rng.choice([np.nan, np.inf, -np.inf], size=int(invalid.sum()))
        out = clean_frames(_seq(raw), contiguous_layout([n_channels], 10.0))
        for c in range(n_channels):
            np.testing.assert_allclose(out.frames[:, c], _interpolation_oracle(clean[:, c], invalid[:, c]),
                                       rtol=0, atol=1e-12)
