"""Frame-grid timeline types and the set algebra the refinement engine runs on.

Speaker activity is stored as a bitset over a uniform frame grid; wall-clock
time in seconds appears only at I/O boundaries. Frame indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "GridMismatchError",
    "FrameGrid",
    "ActivitySet",
    "Diarization",
    "PosteriorMatrix",
    "frames_to_segments",
    "segments_to_frames",
    "frames_to_spans",
    "spans_to_frame_indices",
    "seconds_to_ms",
]


class GridMismatchError(ValueError):
    """Raised when combining values that live on different frame grids."""


def seconds_to_ms(seconds: float) -> int:
    """Round a wall-clock time in seconds to integer milliseconds."""
    return int(round(seconds * 1000.0))


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class FrameGrid:
    """Uniform grid mapping wall-clock time to discrete frame indices."""

    frame_shift_ms: int
    total_frames: int

    def __post_init__(self) -> None:
        if self.frame_shift_ms <= 0:
            raise ValueError(f"frame_shift_ms must be positive, got {self.frame_shift_ms}")
        if self.total_frames <= 0:
            raise ValueError(f"total_frames must be positive, got {self.total_frames}")

    @property
    def duration_seconds(self) -> float:
        return self.total_frames * self.frame_shift_ms / 1000.0

    def time_of(self, frame: int) -> float:
        """Start time of ``frame`` in seconds."""
        return frame * self.frame_shift_ms / 1000.0

    def frame_of(self, time_seconds: float) -> int:
        """Index of the frame containing ``time_seconds``.

        Times are snapped to integer milliseconds first, so
        ``frame_of(time_of(t)) == t`` holds exactly for every frame index.
        """
        return seconds_to_ms(time_seconds) // self.frame_shift_ms

    def center_of(self, frame: int) -> float:
        """Center time of ``frame`` in seconds."""
        return (2 * frame + 1) * self.frame_shift_ms / 2000.0


class ActivitySet:
    """Immutable set of active frame indices on a grid of fixed length.

    Backed by a boolean mask of length ``total_frames``, so union,
    intersection, difference and complement are single vector operations.
    Binary operations require both operands to share the grid length and
    raise :class:`GridMismatchError` otherwise.
    """

    __slots__ = ("_mask",)

    def __init__(self, mask: np.ndarray | Sequence[bool]):
        arr = np.array(mask, dtype=bool)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("mask must be a non-empty one-dimensional boolean array")
        arr.setflags(write=False)
        self._mask = arr

    @classmethod
    def empty(cls, total_frames: int) -> "ActivitySet":
        return cls(np.zeros(total_frames, dtype=bool))

    @classmethod
    def full(cls, total_frames: int) -> "ActivitySet":
        return cls(np.ones(total_frames, dtype=bool))

    @classmethod
    def from_frames(cls, frames: Iterable[int], total_frames: int) -> "ActivitySet":
        mask = np.zeros(total_frames, dtype=bool)
        idx = np.asarray(list(frames), dtype=np.int64)
        if idx.size:
            if idx.min() < 0 or idx.max() >= total_frames:
                raise ValueError(f"frame indices must lie in [0, {total_frames})")
            mask[idx] = True
        return cls(mask)

    @property
    def mask(self) -> np.ndarray:
        """Read-only boolean mask of length ``total_frames``."""
        return self._mask

    @property
    def total_frames(self) -> int:
        return int(self._mask.size)

    @property
    def count(self) -> int:
        """Number of active frames."""
        return int(np.count_nonzero(self._mask))

    @property
    def frames(self) -> np.ndarray:
        """Active frame indices in ascending order."""
        return np.flatnonzero(self._mask).astype(np.int64)

    def _check_grid(self, other: "ActivitySet") -> None:
        if self.total_frames != other.total_frames:
            raise GridMismatchError(
                f"activity sets on different grids: {self.total_frames} vs {other.total_frames}"
            )

    def union(self, other: "ActivitySet") -> "ActivitySet":
        self._check_grid(other)
        return ActivitySet(self._mask | other._mask)

    def intersection(self, other: "ActivitySet") -> "ActivitySet":
        self._check_grid(other)
        return ActivitySet(self._mask & other._mask)

    def difference(self, other: "ActivitySet") -> "ActivitySet":
        self._check_grid(other)
        return ActivitySet(self._mask & ~other._mask)

    def symmetric_difference(self, other: "ActivitySet") -> "ActivitySet":
        self._check_grid(other)
        return ActivitySet(self._mask ^ other._mask)

    def complement(self) -> "ActivitySet":
        """All frames of the grid that are not in this set."""
        return ActivitySet(~self._mask)

    def subset_of(self, other: "ActivitySet") -> bool:
        self._check_grid(other)
        return bool(np.all(~self._mask | other._mask))

    __or__ = union
    __and__ = intersection
    __sub__ = difference
    __xor__ = symmetric_difference
    __invert__ = complement

    def __contains__(self, frame: int) -> bool:
        return 0 <= frame < self.total_frames and bool(self._mask[frame])

    def __iter__(self) -> Iterator[int]:
        return iter(int(f) for f in self.frames)

    def __bool__(self) -> bool:
        return self.count > 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActivitySet):
            return NotImplemented
        return self.total_frames == other.total_frames and bool(
            np.array_equal(self._mask, other._mask)
        )

    def __hash__(self) -> int:
        return hash((self.total_frames, self._mask.tobytes()))

    def __repr__(self) -> str:
        return f"ActivitySet({self.count}/{self.total_frames} frames)"


@dataclass(frozen=True)
class Diarization:
    """A frame grid plus one named activity set per speaker.

    Speakers are an ordered sequence of ``(speaker_id, activity)`` pairs;
    activities may overlap (multi-label).
    """

    grid: FrameGrid
    speakers: tuple[tuple[str, ActivitySet], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "speakers", tuple((str(s), a) for s, a in self.speakers))
        seen = set()
        for speaker_id, activity in self.speakers:
            if not speaker_id:
                raise ValueError("speaker ids must be non-empty strings")
            if speaker_id in seen:
                raise ValueError(f"duplicate speaker id {speaker_id!r}")
            seen.add(speaker_id)
            if activity.total_frames != self.grid.total_frames:
                raise GridMismatchError(
                    f"activity of {speaker_id!r} has {activity.total_frames} frames, "
                    f"grid has {self.grid.total_frames}"
                )

    @property
    def num_speakers(self) -> int:
        return len(self.speakers)

    @property
    def speaker_ids(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.speakers)

    def activity(self, speaker_id: str) -> ActivitySet:
        for s, a in self.speakers:
            if s == speaker_id:
                return a
        raise KeyError(f"unknown speaker id {speaker_id!r}")

    def with_activity(self, speaker_id: str, activity: ActivitySet) -> "Diarization":
        """New diarization with one speaker's activity replaced."""
        if speaker_id not in self.speaker_ids:
            raise KeyError(f"unknown speaker id {speaker_id!r}")
        pairs = tuple(
            (s, activity if s == speaker_id else a) for s, a in self.speakers
        )
        return Diarization(self.grid, pairs)

    def activity_matrix(self) -> np.ndarray:
        """Stacked (num_speakers, total_frames) boolean activity matrix."""
        if not self.speakers:
            return np.zeros((0, self.grid.total_frames), dtype=bool)
        return np.stack([a.mask for _, a in self.speakers])

    def speech_mask(self) -> np.ndarray:
        """Frames where at least one speaker is active."""
        return self.activity_matrix().any(axis=0)

    def is_overlap_free(self) -> bool:
        """True iff all pairwise speaker intersections are empty."""
        counts = self.activity_matrix().sum(axis=0)
        return bool(np.all(counts <= 1))


@dataclass(frozen=True)
class PosteriorMatrix:
    """Two-speaker posteriors over an ascending list of selected frames."""

    frame_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.frame_indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("frame_indices must be a non-empty one-dimensional array")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("frame_indices must be strictly ascending")
        if vals.shape != (idx.size, 2):
            raise ValueError(
                f"values must have shape ({idx.size}, 2), got {vals.shape}"
            )
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("posterior values must lie in [0, 1]")
        idx.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "frame_indices", idx)
        object.__setattr__(self, "values", vals)

    @property
    def num_frames(self) -> int:
        return int(self.frame_indices.size)


def frames_to_segments(activity: ActivitySet, grid: FrameGrid) -> list[tuple[float, float]]:
    """Maximal runs of consecutive active frames as (onset, duration) in seconds."""
    if activity.total_frames != grid.total_frames:
        raise GridMismatchError("activity does not conform to grid")
    edges = np.flatnonzero(
        np.diff(np.concatenate(([False], activity.mask, [False])).astype(np.int8))
    )
    starts, ends = edges[0::2], edges[1::2]
    shift = grid.frame_shift_ms
    return [
        (int(s) * shift / 1000.0, int(e - s) * shift / 1000.0)
        for s, e in zip(starts, ends)
    ]


def segments_to_frames(
    segments: Iterable[tuple[float, float]], grid: FrameGrid
) -> ActivitySet:
    """Rasterize (onset, duration) segments onto the grid.

    A frame is active iff its center lies inside ``[onset, onset + duration)``.
    Arithmetic is done in integer milliseconds so the inverse of
    :func:`frames_to_segments` is exact.
    """
    total = grid.total_frames
    shift = grid.frame_shift_ms
    mask = np.zeros(total, dtype=bool)
    for onset, duration in segments:
        onset_ms = seconds_to_ms(onset)
        offset_ms = onset_ms + seconds_to_ms(duration)
        # centers live at (2t+1)*shift in double-millisecond units
        first = max(0, _ceil_div(2 * onset_ms - shift, 2 * shift))
        last_excl = min(total, (2 * offset_ms - shift - 1) // (2 * shift) + 1)
        if last_excl > first:
            mask[first:last_excl] = True
    return ActivitySet(mask)


def frames_to_spans(activity: ActivitySet) -> list[tuple[int, int]]:
    """Run-length encode active frames as (start, length) spans."""
    edges = np.flatnonzero(
        np.diff(np.concatenate(([False], activity.mask, [False])).astype(np.int8))
    )
    return [(int(s), int(e - s)) for s, e in zip(edges[0::2], edges[1::2])]


def spans_to_frame_indices(spans: Iterable[Sequence[int]]) -> np.ndarray:
    """Decode (start, length) spans back to ascending frame indices."""
    chunks = []
    prev_end = -1
    for span in spans:
        if len(span) != 2:
            raise ValueError(f"span must be a (start, length) pair, got {span!r}")
        start, length = int(span[0]), int(span[1])
        if start < 0 or length <= 0:
            raise ValueError(f"invalid span ({start}, {length})")
        if start <= prev_end:
            raise ValueError("spans must be ascending and non-overlapping")
        chunks.append(np.arange(start, start + length, dtype=np.int64))
        prev_end = start + length - 1
    if not chunks:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(chunks)
