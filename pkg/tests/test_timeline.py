import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from diarefine.timeline import (
    ActivitySet,
    Diarization,
    FrameGrid,
    GridMismatchError,
    PosteriorMatrix,
    frames_to_segments,
    frames_to_spans,
    seconds_to_ms,
    segments_to_frames,
    spans_to_frame_indices,
)
from helpers import aset, diar


# ---------------------------------------------------------------- FrameGrid

def test_grid_validation():
    with pytest.raises(ValueError):
        FrameGrid(0, 10)
    with pytest.raises(ValueError):
        FrameGrid(100, -1)


def test_grid_times():
    grid = FrameGrid(100, 50)
    assert grid.time_of(0) == 0.0
    assert grid.time_of(13) == 1.3
    assert grid.center_of(0) == 0.05
    assert grid.duration_seconds == 5.0
    assert grid.frame_of(1.3) == 13
    # 0.3s is not exactly representable in binary; the grid must not care
    assert grid.frame_of(0.3) == 3
    assert grid.frame_of(0.2999999999) == 3


@given(st.integers(min_value=0, max_value=10_000), st.sampled_from([10, 25, 100, 160]))
def test_grid_frame_time_roundtrip(frame, shift):
    grid = FrameGrid(shift, 20_000)
    assert grid.frame_of(grid.time_of(frame)) == frame


def test_seconds_to_ms_snaps_float_noise():
    assert seconds_to_ms(0.3) == 300
    assert seconds_to_ms(1.1 + 2.2) == 3300
    assert seconds_to_ms(0.0005) == 0 or seconds_to_ms(0.0005) == 1  # banker's edge


# --------------------------------------------------------------- ActivitySet

def test_activity_set_basics():
    a = aset(8, [1, 2, 5])
    assert a.count == 3
    assert a.total_frames == 8
    assert list(a.frames) == [1, 2, 5]
    assert 2 in a and 3 not in a
    assert list(a) == [1, 2, 5]
    assert bool(a) and not bool(ActivitySet.empty(8))
    assert ActivitySet.full(4).count == 4


def test_activity_set_mask_is_frozen():
    a = aset(4, [0])
    with pytest.raises(ValueError):
        a.mask[1] = True


def test_activity_set_grid_mismatch():
    with pytest.raises(GridMismatchError):
        aset(4, [0]) | aset(5, [0])


def test_activity_set_out_of_range_frames():
    with pytest.raises(ValueError):
        aset(4, [4])
    with pytest.raises(ValueError):
        aset(4, [-1])


frames_strategy = st.builds(
    lambda total, picks: (total, sorted(set(p % total for p in picks))),
    st.integers(min_value=1, max_value=200),
    st.lists(st.integers(min_value=0, max_value=10_000), max_size=60),
)


@given(frames_strategy, frames_strategy)
def test_set_operations_match_python_sets(fa, fb):
    # Oracle: plain Python sets over the frame indices.
    total = max(fa[0], fb[0])
    a, b = set(fa[1]), set(fb[1])
    u, v = aset(total, a), aset(total, b)
    universe = set(range(total))
    assert set((u | v).frames) == a | b
    assert set((u & v).frames) == a & b
    assert set((u - v).frames) == a - b
    assert set((u ^ v).frames) == a ^ b
    assert set((~u).frames) == universe - a
    assert u.subset_of(v) == (a <= b)
    assert (u == v) == (a == b)
    if u == v:
        assert hash(u) == hash(v)


# ------------------------------------------------- segments <-> frames

def test_segment_rasterization_center_rule():
    grid = FrameGrid(100, 10)
    # centers at 0.05, 0.15, ...; active iff onset <= center < offset
    assert list(segments_to_frames([(0.0, 0.25)], grid).frames) == [0, 1]
    assert list(segments_to_frames([(0.25, 0.25)], grid).frames) == [2, 3, 4]
    assert list(segments_to_frames([(0.05, 0.1)], grid).frames) == [0]
    # zero-length and sub-frame segments that straddle no center
    assert segments_to_frames([(0.06, 0.03)], grid).count == 0
    # segment extending past the grid is clipped
    assert list(segments_to_frames([(0.85, 5.0)], grid).frames) == [8, 9]


def test_frames_to_segments_merges_runs():
    grid = FrameGrid(100, 10)
    a = aset(10, [0, 1, 2, 5, 6, 9])
    assert frames_to_segments(a, grid) == [(0.0, 0.3), (0.5, 0.2), (0.9, 0.1)]
    assert frames_to_segments(ActivitySet.empty(10), grid) == []


@given(
    st.integers(min_value=1, max_value=300),
    st.data(),
    st.sampled_from([10, 100, 160]),
)
@settings(max_examples=60)
def test_segment_roundtrip_is_exact(total, data, shift):
    mask = np.array(
        data.draw(st.lists(st.booleans(), min_size=total, max_size=total)), dtype=bool
    )
    grid = FrameGrid(shift, total)
    a = ActivitySet(mask)
    back = segments_to_frames(frames_to_segments(a, grid), grid)
    assert back == a


def test_spans_roundtrip():
    idx = np.array([0, 1, 2, 7, 9, 10], dtype=np.int64)
    a = aset(11, idx)
    spans = frames_to_spans(a)
    assert spans == [(0, 3), (7, 1), (9, 2)]
    assert np.array_equal(spans_to_frame_indices(spans), idx)


def test_spans_validation():
    with pytest.raises(ValueError):
        spans_to_frame_indices([(3, 0)])
    with pytest.raises(ValueError):
        spans_to_frame_indices([(-1, 2)])
    with pytest.raises(ValueError):
        spans_to_frame_indices([(0, 3), (2, 2)])  # overlapping
    with pytest.raises(ValueError):
        spans_to_frame_indices([(5, 1), (0, 1)])  # descending


@given(st.lists(st.integers(min_value=0, max_value=500), min_size=1, max_size=80))
def test_spans_roundtrip_property(picks):
    idx = np.array(sorted(set(picks)), dtype=np.int64)
    a = ActivitySet.from_frames(idx, 501)
    assert np.array_equal(spans_to_frame_indices(frames_to_spans(a)), idx)


# --------------------------------------------------------------- Diarization

def test_diarization_validation():
    with pytest.raises(ValueError):
        diar(5, {"": [0]})
    grid = FrameGrid(100, 5)
    with pytest.raises(ValueError):
        Diarization(grid, (("a", aset(5, [0])), ("a", aset(5, [1]))))
    with pytest.raises(GridMismatchError):
        Diarization(grid, (("a", aset(6, [0])),))


def test_diarization_accessors():
    d = diar(6, {"a": [0, 1], "b": [1, 2]})
    assert d.num_speakers == 2
    assert d.speaker_ids == ("a", "b")
    assert list(d.activity("b").frames) == [1, 2]
    with pytest.raises(KeyError):
        d.activity("missing")
    m = d.activity_matrix()
    assert m.shape == (2, 6)
    assert list(d.speech_mask().nonzero()[0]) == [0, 1, 2]
    assert not d.is_overlap_free()
    assert diar(6, {"a": [0], "b": [3]}).is_overlap_free()


def test_with_activity_replaces_one_speaker():
    d = diar(6, {"a": [0], "b": [3]})
    d2 = d.with_activity("a", aset(6, [0, 5]))
    assert list(d2.activity("a").frames) == [0, 5]
    assert d2.activity("b") == d.activity("b")
    assert d.speaker_ids == d2.speaker_ids
    with pytest.raises(KeyError):
        d.with_activity("zz", aset(6, []))


# ----------------------------------------------------------- PosteriorMatrix

def test_posterior_matrix_validation():
    idx = np.array([2, 5, 7], dtype=np.int64)
    vals = np.array([[0.1, 0.9], [0.5, 0.5], [1.0, 0.0]])
    p = PosteriorMatrix(idx, vals)
    assert p.values.shape == (3, 2)
    with pytest.raises(ValueError):
        PosteriorMatrix(np.array([], dtype=np.int64), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        PosteriorMatrix(np.array([3, 3]), np.zeros((2, 2)))  # not strictly ascending
    with pytest.raises(ValueError):
        PosteriorMatrix(idx, np.zeros((3, 3)))  # not two channels
    with pytest.raises(ValueError):
        PosteriorMatrix(idx, np.full((3, 2), 1.5))  # outside [0, 1]
    with pytest.raises(ValueError):
        p.values[0, 0] = 0.3  # read-only
