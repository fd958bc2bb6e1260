"""Synthetic conversations with a controllable overlap dial.

The generator produces alternating speaker turns whose onsets optionally
reach back into the previous turn, creating two-speaker overlap.  An
overlap-probability feedback loop resamples the scene until the realized
overlap ratio lands within three percentage points of the target, so tests
can rely on the dial instead of hoping.

Construction guarantees worth knowing:

* a new turn reaches at most 45% into the previous turn, and at least the
  final 55% of every turn is overlap-free, so no frame ever carries three
  speakers;
* consecutive turns always belong to different speakers;
* the first K turns cycle through all speakers, so nobody is silent.

``degrade_to_clustering`` then manufactures the kind of hypothesis a
hard-clustering system would emit from that reference: every overlapped
frame keeps only the speaker whose turn started first, and an optional
label-confusion rate corrupts single frames to a random other speaker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeline import ActivitySet, Diarization, FrameGrid, segments_to_frames

__all__ = ["SceneSpec", "generate_scene", "degrade_to_clustering", "overlap_ratio"]

# A turn may overlap its predecessor by this fraction of the shorter of the
# two turns; staying under 0.5 on both ends is what rules out triple overlap.
_OVERLAP_LO = 0.20
_OVERLAP_HI = 0.45
_RATIO_TOLERANCE = 0.03
_MAX_ATTEMPTS = 80


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic conversation."""

    num_speakers: int
    total_duration: float
    target_overlap_ratio: float = 0.17
    mean_turn: float = 2.0
    mean_gap: float = 0.4
    seed: int = 0
    frame_shift_ms: int = 100

    def __post_init__(self) -> None:
        if self.num_speakers < 1:
            raise ValueError(f"need at least one speaker, got {self.num_speakers}")
        if self.total_duration <= 0 or self.mean_turn <= 0:
            raise ValueError("durations must be positive")
        if self.mean_gap < 0:
            raise ValueError(f"mean_gap must be >= 0, got {self.mean_gap}")
        if not 0.0 <= self.target_overlap_ratio < 1.0:
            raise ValueError(
                f"target_overlap_ratio must lie in [0, 1), got {self.target_overlap_ratio}"
            )
        if self.frame_shift_ms <= 0:
            raise ValueError(f"frame_shift_ms must be positive, got {self.frame_shift_ms}")


def speaker_label(index: int) -> str:
    return f"spk{index:02d}"


def overlap_ratio(d: Diarization) -> float:
    """Overlapped speech frames divided by total speech frames (0 if silent)."""
    counts = d.activity_matrix().sum(axis=0)
    speech = int(np.count_nonzero(counts >= 1))
    if speech == 0:
        return 0.0
    return int(np.count_nonzero(counts >= 2)) / speech


def _attempt_scene(spec: SceneSpec, rng: np.random.Generator, p_overlap: float) -> Diarization:
    k = spec.num_speakers
    turns: list[tuple[int, float, float]] = []  # (speaker index, onset, offset)
    order = rng.permutation(k)
    turn_index = 0
    prev_speaker = -1
    prev_onset = 0.0
    prev_offset = 0.0
    while True:
        if turn_index < k:
            speaker = int(order[turn_index])
        elif k == 1:
            speaker = 0
        else:
            choices = [s for s in range(k) if s != prev_speaker]
            speaker = choices[int(rng.integers(len(choices)))]
        duration = float(
            np.clip(rng.exponential(spec.mean_turn), 0.5 * spec.mean_turn, 3.0 * spec.mean_turn)
        )
        if turn_index == 0:
            onset = float(rng.exponential(spec.mean_gap))
        elif k >= 2 and rng.random() < p_overlap:
            reach = rng.uniform(_OVERLAP_LO, _OVERLAP_HI) * min(
                prev_offset - prev_onset, duration
            )
            onset = prev_offset - reach
        else:
            onset = prev_offset + float(rng.exponential(spec.mean_gap))
        if onset >= spec.total_duration:
            break
        offset = onset + duration
        if offset > spec.total_duration:
            # Truncating would break the 55% overlap-free tail that the
            # no-triple-overlap guarantee rests on; end the scene instead.
            break
        turns.append((speaker, onset, offset))
        prev_speaker, prev_onset, prev_offset = speaker, onset, offset
        turn_index += 1
        if turn_index > 100_000:
            raise RuntimeError("scene generation did not terminate")

    grid = FrameGrid(spec.frame_shift_ms, _frames_for_duration(spec))
    speakers = []
    for index in range(k):
        segments = [(on, off - on) for s, on, off in turns if s == index and off > on]
        speakers.append((speaker_label(index), segments_to_frames(segments, grid)))
    return Diarization(grid, tuple(speakers))


def _frames_for_duration(spec: SceneSpec) -> int:
    duration_ms = int(round(spec.total_duration * 1000))
    return -(-duration_ms // spec.frame_shift_ms)


def generate_scene(spec: SceneSpec) -> Diarization:
    """Deterministically generate a reference conversation for ``spec``.

    Resamples with an adjusted overlap probability until the realized overlap
    ratio is within ±3 percentage points of the target and every speaker has
    at least one frame both in the reference and after overlap collapse.
    """
    if spec.num_speakers == 1 and spec.target_overlap_ratio > 0:
        raise ValueError("a single speaker cannot overlap with anyone")

    target = spec.target_overlap_ratio
    p = 0.0 if target == 0 else min(0.95, 4.2 * target / (1.0 + target))
    for attempt in range(_MAX_ATTEMPTS):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=spec.seed, spawn_key=(attempt,))
        )
        scene = _attempt_scene(spec, rng, p)
        realized = overlap_ratio(scene)
        speakers_ok = all(
            scene.activity(s).count > 0 for s in scene.speaker_ids
        ) and all(
            a.count > 0
            for _, a in _collapse_overlaps(scene)
        )
        if speakers_ok and abs(realized - target) <= _RATIO_TOLERANCE:
            return scene
        if target > 0:
            if realized <= 0:
                p = min(0.98, p * 2.0 + 0.05)
            else:
                # Overlap mass scales roughly linearly with p in r/(1+r) units.
                correction = (target / (1.0 + target)) / (realized / (1.0 + realized))
                p = float(np.clip(p * correction, 0.01, 0.98))
    raise RuntimeError(
        f"could not hit overlap ratio {target} within {_MAX_ATTEMPTS} attempts "
        f"(seed {spec.seed})"
    )


def _run_starts(mask: np.ndarray) -> np.ndarray:
    """For each frame, the start index of the activity run covering it.

    Frames outside any run carry stale values; callers must mask with
    ``mask`` before using them.
    """
    idx = np.arange(mask.size, dtype=np.int64)
    starts = mask & ~np.concatenate(([False], mask[:-1]))
    seed = np.where(starts, idx, -1)
    return np.maximum.accumulate(seed)


def _collapse_overlaps(reference: Diarization) -> list[tuple[str, ActivitySet]]:
    """Keep, per frame, only the active speaker whose run started earliest.

    Ties go to the speaker listed first.  This is the single-label view a
    hard clustering system would produce.
    """
    total = reference.grid.total_frames
    k = reference.num_speakers
    matrix = reference.activity_matrix()
    keys = np.full((k, total), np.iinfo(np.int64).max, dtype=np.int64)
    for row, speaker in enumerate(reference.speaker_ids):
        mask = matrix[row]
        keys[row, mask] = _run_starts(mask)[mask] * k + row
    winner = np.argmin(keys, axis=0)
    any_speech = matrix.any(axis=0)
    collapsed = []
    for row, speaker in enumerate(reference.speaker_ids):
        collapsed.append((speaker, ActivitySet(any_speech & (winner == row))))
    return collapsed


def degrade_to_clustering(
    reference: Diarization, confusion_rate: float = 0.0, seed: int = 0
) -> Diarization:
    """Produce the overlap-free hypothesis a clustering stage would emit.

    Overlapped frames keep only the earliest-started speaker; afterwards each
    speech frame is relabeled to a uniformly random other speaker with
    probability ``confusion_rate``.  Reference silence stays silent.
    """
    if not 0.0 <= confusion_rate <= 1.0:
        raise ValueError(f"confusion_rate must lie in [0, 1], got {confusion_rate}")
    collapsed = _collapse_overlaps(reference)
    k = reference.num_speakers
    if confusion_rate > 0.0 and k >= 2:
        total = reference.grid.total_frames
        labels = np.full(total, -1, dtype=np.int64)
        for row, (_, activity) in enumerate(collapsed):
            labels[activity.mask] = row
        speech = np.flatnonzero(labels >= 0)
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(0xC0F,))
        )
        corrupt = speech[rng.random(speech.size) < confusion_rate]
        # Uniform over the k-1 other speakers, per corrupted frame.
        shifts = rng.integers(1, k, size=corrupt.size)
        labels[corrupt] = (labels[corrupt] + shifts) % k
        collapsed = [
            (speaker, ActivitySet(labels == row))
            for row, (speaker, _) in enumerate(collapsed)
        ]
    return Diarization(reference.grid, tuple(collapsed))
