"""RTTM and UEM text formats, and their mapping onto the frame grid.

RTTM lines are the 10-field NIST convention::

    SPEAKER <recording> <channel> <onset> <duration> <NA> <NA> <speaker> <NA> <NA>

UEM lines carry 4 fields: ``<recording> <channel> <onset> <offset>``.
Only SPEAKER records are supported; comment lines start with ``;``.
The placeholder fields (6, 7, 9, 10) are not validated on input and are
always emitted as ``<NA>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable

from .timeline import (
    ActivitySet,
    Diarization,
    FrameGrid,
    _ceil_div,
    frames_to_segments,
    seconds_to_ms,
    segments_to_frames,
)

__all__ = [
    "RttmRecord",
    "UemRegion",
    "RttmParseError",
    "parse_rttm",
    "parse_uem",
    "rttm_to_diarization",
    "emit_rttm",
    "records_total_frames",
]


class RttmParseError(ValueError):
    """A malformed line, carrying its 1-based line number and text."""

    def __init__(self, line_number: int, line: str, reason: str):
        self.line_number = line_number
        self.line = line
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}: {line!r}")


@dataclass(frozen=True)
class RttmRecord:
    """One SPEAKER segment of an RTTM file."""

    recording_id: str
    channel: int
    onset: float
    duration: float
    speaker_id: str
    type_tag: str = "SPEAKER"

    def __post_init__(self) -> None:
        if self.onset < 0:
            raise ValueError(f"onset must be >= 0, got {self.onset}")
        if self.duration <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")

    @property
    def offset(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class UemRegion:
    """One scoring region of a UEM file."""

    recording_id: str
    channel: int
    onset: float
    offset: float

    def __post_init__(self) -> None:
        if self.onset < 0:
            raise ValueError(f"onset must be >= 0, got {self.onset}")
        if self.offset <= self.onset:
            raise ValueError(f"offset must exceed onset, got [{self.onset}, {self.offset}]")


def _lines(source: str | IO[str] | Iterable[str]) -> Iterable[str]:
    if isinstance(source, str):
        return source.splitlines()
    return source


def parse_rttm(source: str | IO[str] | Iterable[str]) -> dict[str, list[RttmRecord]]:
    """Parse RTTM text into records grouped by recording id.

    Blank lines and ``;`` comments are skipped. Any other malformed line
    raises :class:`RttmParseError` with its line number; original record
    order is preserved within each recording.
    """
    by_recording: dict[str, list[RttmRecord]] = {}
    for line_number, raw in enumerate(_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        fields = line.split()
        if len(fields) != 10:
            raise RttmParseError(line_number, raw, f"expected 10 fields, got {len(fields)}")
        if fields[0] != "SPEAKER":
            raise RttmParseError(line_number, raw, f"unsupported record type {fields[0]!r}")
        try:
            channel = int(fields[2])
        except ValueError:
            raise RttmParseError(line_number, raw, f"bad channel {fields[2]!r}") from None
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError:
            raise RttmParseError(line_number, raw, "bad onset/duration") from None
        if not (math.isfinite(onset) and math.isfinite(duration)):
            raise RttmParseError(line_number, raw, "non-finite onset/duration")
        if onset < 0:
            raise RttmParseError(line_number, raw, f"negative onset {onset}")
        if duration <= 0:
            raise RttmParseError(line_number, raw, f"non-positive duration {duration}")
        record = RttmRecord(
            recording_id=fields[1],
            channel=channel,
            onset=onset,
            duration=duration,
            speaker_id=fields[7],
        )
        by_recording.setdefault(record.recording_id, []).append(record)
    return by_recording


def parse_uem(source: str | IO[str] | Iterable[str]) -> dict[str, list[UemRegion]]:
    """Parse UEM text into scoring regions grouped by recording id."""
    by_recording: dict[str, list[UemRegion]] = {}
    for line_number, raw in enumerate(_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise RttmParseError(line_number, raw, f"expected 4 fields, got {len(fields)}")
        try:
            channel = int(fields[1])
            onset = float(fields[2])
            offset = float(fields[3])
        except ValueError:
            raise RttmParseError(line_number, raw, "bad channel/onset/offset") from None
        if onset < 0 or offset <= onset:
            raise RttmParseError(line_number, raw, f"invalid region [{onset}, {offset}]")
        region = UemRegion(fields[0], channel, onset, offset)
        by_recording.setdefault(region.recording_id, []).append(region)
    return by_recording


def records_total_frames(records: Iterable[RttmRecord], frame_shift_ms: int) -> int:
    """Frame count needed to cover every record: ceil(max offset / shift)."""
    max_offset_ms = 0
    for record in records:
        max_offset_ms = max(max_offset_ms, seconds_to_ms(record.onset) + seconds_to_ms(record.duration))
    return _ceil_div(max_offset_ms, frame_shift_ms)


def rttm_to_diarization(
    records: list[RttmRecord],
    frame_shift_ms: int = 100,
    total_frames: int | None = None,
) -> Diarization:
    """Rasterize one recording's records onto a frame grid.

    A frame is active for a speaker iff its center lies inside one of that
    speaker's segments. The grid covers ceil(max offset / shift) frames unless
    a larger ``total_frames`` is given (for co-rasterizing several files).
    """
    if not records:
        raise ValueError("cannot rasterize an empty record list")
    recording_ids = {r.recording_id for r in records}
    if len(recording_ids) != 1:
        raise ValueError(f"records span multiple recordings: {sorted(recording_ids)}")
    needed = records_total_frames(records, frame_shift_ms)
    if total_frames is None:
        total_frames = needed
    elif total_frames < needed:
        raise ValueError(f"total_frames={total_frames} cannot hold segments needing {needed}")
    grid = FrameGrid(frame_shift_ms, total_frames)

    segments_by_speaker: dict[str, list[tuple[float, float]]] = {}
    for record in records:
        segments_by_speaker.setdefault(record.speaker_id, []).append(
            (record.onset, record.duration)
        )
    speakers = tuple(
        (speaker_id, segments_to_frames(segments, grid))
        for speaker_id, segments in segments_by_speaker.items()
    )
    return Diarization(grid, speakers)


def emit_rttm(diarization: Diarization, recording_id: str) -> str:
    """Emit one SPEAKER line per maximal segment per speaker.

    Onsets and durations carry exactly 3 decimal places; lines are sorted by
    (onset, speaker_id). Parsing and re-rasterizing the output on the same
    grid reproduces the input activity exactly.
    """
    entries: list[tuple[int, str, str]] = []
    for speaker_id, activity in diarization.speakers:
        for onset, duration in frames_to_segments(activity, diarization.grid):
            line = (
                f"SPEAKER {recording_id} 1 {onset:.3f} {duration:.3f} "
                f"<NA> <NA> {speaker_id} <NA> <NA>"
            )
            entries.append((seconds_to_ms(onset), speaker_id, line))
    entries.sort(key=lambda e: (e[0], e[1]))
    if not entries:
        return ""
    return "\n".join(line for _, _, line in entries) + "\n"
