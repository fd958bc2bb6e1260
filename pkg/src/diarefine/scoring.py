"""Overlap-aware, frame-level diarization scoring.

Scores are computed directly on the shared frame grid rather than on segment
boundaries: with overlapped reference speech each frame contributes its full
speaker multiset, so missing the second speaker of an overlap is charged
exactly like missing a lone speaker.  A symmetric collar around reference
segment boundaries and an optional evaluation map (UEM) restrict which frames
are scored.

Error decomposition per scored frame, with ``n_ref`` active reference
speakers, ``n_hyp`` active hypothesis speakers, and ``n_correct`` matches
under a one-to-one speaker mapping:

    miss        = max(0, n_ref - n_hyp)
    false alarm = max(0, n_hyp - n_ref)
    confusion   = min(n_ref, n_hyp) - n_correct

DER is the sum of the three masses divided by the total reference
speaker-frame count.  JER follows the DIHARD scorer's convention: one minus
the Jaccard index per reference speaker under the DER-optimal mapping,
averaged over reference speakers (unmapped speakers count as 1.0); the collar
does not apply to JER.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .rttm import UemRegion
from .timeline import Diarization, GridMismatchError, frames_to_segments, segments_to_frames

__all__ = [
    "ScoreReport",
    "optimal_mapping",
    "compute_der",
    "compute_jer",
    "aggregate_reports",
    "format_report_line",
    "format_report_table",
]


@dataclass(frozen=True)
class ScoreReport:
    """Frame counts and percentages for one recording (or an aggregate)."""

    scored_frames: int
    ref_speaker_frames: int
    missed_frames: int
    false_alarm_frames: int
    confusion_frames: int
    jer_fractions: tuple[float, ...]
    mapping: dict[str, str]

    @property
    def error_frames(self) -> int:
        return self.missed_frames + self.false_alarm_frames + self.confusion_frames

    @property
    def der(self) -> float:
        return 100.0 * self.error_frames / self.ref_speaker_frames

    @property
    def miss(self) -> float:
        return 100.0 * self.missed_frames / self.ref_speaker_frames

    @property
    def false_alarm(self) -> float:
        return 100.0 * self.false_alarm_frames / self.ref_speaker_frames

    @property
    def confusion(self) -> float:
        return 100.0 * self.confusion_frames / self.ref_speaker_frames

    @property
    def jer(self) -> float:
        if not self.jer_fractions:
            return 0.0
        return 100.0 * float(np.mean(self.jer_fractions))


def _overlap_matrix(
    ref: Diarization, hyp: Diarization, scored: Optional[np.ndarray] = None
) -> np.ndarray:
    r = ref.activity_matrix()
    h = hyp.activity_matrix()
    if scored is not None:
        r = r & scored
        h = h & scored
    return (r.astype(np.int64) @ h.astype(np.int64).T)


def _assign(overlap: np.ndarray) -> dict[int, int]:
    """Max-total-overlap one-to-one assignment; zero-overlap pairs dropped."""
    if overlap.size == 0:
        return {}
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return {int(r): int(c) for r, c in zip(rows, cols) if overlap[r, c] > 0}


def optimal_mapping(ref: Diarization, hyp: Diarization) -> dict[str, str]:
    """One-to-one partial map of reference to hypothesis speakers that
    maximizes the total number of jointly active frames."""
    if ref.grid != hyp.grid:
        raise GridMismatchError("reference and hypothesis use different grids")
    assignment = _assign(_overlap_matrix(ref, hyp))
    return {
        ref.speaker_ids[r]: hyp.speaker_ids[c] for r, c in sorted(assignment.items())
    }


def _collar_mask(ref: Diarization, collar_seconds: float) -> np.ndarray:
    """True for frames whose center falls within the collar of any reference
    segment boundary.  Exact in integer milliseconds: frame t's doubled
    center is (2t+1)*shift, compared against doubled boundary times."""
    grid = ref.grid
    shift = grid.frame_shift_ms
    collar_ms2 = int(round(collar_seconds * 1000)) * 2
    boundaries2: set[int] = set()
    for speaker in ref.speaker_ids:
        for onset, duration in frames_to_segments(ref.activity(speaker), grid):
            onset_ms = int(round(onset * 1000))
            offset_ms = onset_ms + int(round(duration * 1000))
            boundaries2.add(2 * onset_ms)
            boundaries2.add(2 * offset_ms)
    mask = np.zeros(grid.total_frames, dtype=bool)
    centers2 = (2 * np.arange(grid.total_frames, dtype=np.int64) + 1) * shift
    for b2 in boundaries2:
        mask |= np.abs(centers2 - b2) <= collar_ms2
    return mask


def _uem_mask(grid, uem: Sequence[UemRegion]) -> np.ndarray:
    spans = [(region.onset, region.offset - region.onset) for region in uem]
    return segments_to_frames(spans, grid).mask


def _jer_fractions(
    ref: Diarization, hyp: Diarization, mapping: dict[str, str],
    scored: Optional[np.ndarray] = None,
) -> tuple[float, ...]:
    fractions = []
    for speaker in ref.speaker_ids:
        r = ref.activity(speaker).mask
        if scored is not None:
            r = r & scored
        mapped = mapping.get(speaker)
        if mapped is None:
            fractions.append(0.0 if not r.any() else 1.0)
            continue
        h = hyp.activity(mapped).mask
        if scored is not None:
            h = h & scored
        union = int(np.count_nonzero(r | h))
        if union == 0:
            fractions.append(0.0)
        else:
            fractions.append(1.0 - int(np.count_nonzero(r & h)) / union)
    return tuple(fractions)


def compute_der(
    ref: Diarization,
    hyp: Diarization,
    collar_seconds: float = 0.0,
    uem: Optional[Sequence[UemRegion]] = None,
) -> ScoreReport:
    """Score a hypothesis against a reference on their shared grid.

    The speaker mapping is chosen on the scored frames (collar and UEM
    already applied), so hypothesis activity on excluded frames can never
    influence any component of the result.  JER ignores the collar but
    honours the UEM.
    """
    if ref.grid != hyp.grid:
        raise GridMismatchError("reference and hypothesis use different grids")
    if collar_seconds < 0:
        raise ValueError(f"collar must be >= 0, got {collar_seconds}")

    scored = np.ones(ref.grid.total_frames, dtype=bool)
    if uem is not None:
        scored &= _uem_mask(ref.grid, uem)
    jer_scope = scored.copy()
    if collar_seconds > 0:
        scored &= ~_collar_mask(ref, collar_seconds)

    r = ref.activity_matrix() & scored
    h = hyp.activity_matrix() & scored
    n_ref = r.sum(axis=0)
    n_hyp = h.sum(axis=0)
    ref_speaker_frames = int(n_ref.sum())
    if ref_speaker_frames == 0:
        raise ValueError("no reference speech in the scored region; DER is undefined")

    assignment = _assign(_overlap_matrix(ref, hyp, scored))
    n_correct = np.zeros(ref.grid.total_frames, dtype=np.int64)
    for ri, ci in assignment.items():
        n_correct += r[ri] & h[ci]

    missed = int(np.maximum(n_ref - n_hyp, 0).sum())
    false_alarm = int(np.maximum(n_hyp - n_ref, 0).sum())
    confusion = int((np.minimum(n_ref, n_hyp) - n_correct).sum())
    mapping = {
        ref.speaker_ids[ri]: hyp.speaker_ids[ci]
        for ri, ci in sorted(assignment.items())
    }
    return ScoreReport(
        scored_frames=int(np.count_nonzero(scored)),
        ref_speaker_frames=ref_speaker_frames,
        missed_frames=missed,
        false_alarm_frames=false_alarm,
        confusion_frames=confusion,
        jer_fractions=_jer_fractions(ref, hyp, mapping, jer_scope),
        mapping=mapping,
    )


def compute_jer(ref: Diarization, hyp: Diarization, mapping: dict[str, str]) -> float:
    """Mean per-reference-speaker Jaccard error under ``mapping``, in percent."""
    fractions = _jer_fractions(ref, hyp, mapping)
    if not fractions:
        return 0.0
    return 100.0 * float(np.mean(fractions))


def aggregate_reports(reports: Iterable[ScoreReport]) -> ScoreReport:
    """Frame-weighted pool of several recordings' reports.

    Error masses and reference frames add; JER stays a plain mean over all
    reference speakers of all recordings.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    jer_fractions: tuple[float, ...] = ()
    for report in reports:
        jer_fractions += report.jer_fractions
    return ScoreReport(
        scored_frames=sum(r.scored_frames for r in reports),
        ref_speaker_frames=sum(r.ref_speaker_frames for r in reports),
        missed_frames=sum(r.missed_frames for r in reports),
        false_alarm_frames=sum(r.false_alarm_frames for r in reports),
        confusion_frames=sum(r.confusion_frames for r in reports),
        jer_fractions=jer_fractions,
        mapping={},
    )


def format_report_line(name: str, report: ScoreReport) -> str:
    """Single machine-readable key=value record."""
    return (
        f"recording={name} der={report.der:.2f} jer={report.jer:.2f} "
        f"miss={report.miss:.2f} fa={report.false_alarm:.2f} "
        f"conf={report.confusion:.2f} scored_frames={report.scored_frames}"
    )


def format_report_table(rows: Sequence[tuple[str, ScoreReport]]) -> str:
    """Human-readable table with an OVERALL row when given several."""
    if len(rows) > 1:
        rows = list(rows) + [("OVERALL", aggregate_reports(r for _, r in rows))]
    width = max(len(name) for name, _ in rows)
    width = max(width, len("recording"))
    header = (
        f"{'recording':<{width}}  {'DER%':>7} {'JER%':>7} {'miss%':>7} "
        f"{'fa%':>7} {'conf%':>7}"
    )
    lines = [header, "-" * len(header)]
    for name, report in rows:
        lines.append(
            f"{name:<{width}}  {report.der:>7.2f} {report.jer:>7.2f} "
            f"{report.miss:>7.2f} {report.false_alarm:>7.2f} {report.confusion:>7.2f}"
        )
    return "\n".join(lines)
