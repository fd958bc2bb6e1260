"""Iterative pairwise refinement of a clustering-based diarization.

The input diarization assigns each frame to at most one speaker.  For every
pair of speakers we select the frames in which no *other* speaker is active,
ask a two-speaker posterior backend to re-decide that subset, and — after
resolving the channel permutation and checking a retention gate — update the
pair's activities.  Because the selected frames exclude all third speakers,
the two-speaker model is never shown speech it cannot explain, yet it can
recover overlaps the clustering stage was structurally unable to represent.

Pairs are processed in decreasing order of selected-frame count; the order is
fixed at the start of each pass, while the frame selection itself is
recomputed from the current (already partially updated) diarization at every
step.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Literal, Optional

import numpy as np

from .backends import BackendError, PosteriorRequest
from .timeline import ActivitySet, Diarization, GridMismatchError, PosteriorMatrix

__all__ = [
    "RefineConfig",
    "PairStep",
    "RefineTrace",
    "select_pair_frames",
    "order_pairs",
    "threshold_posteriors",
    "similarity",
    "resolve_permutation",
    "check_acceptance",
    "apply_update",
    "refine_recording",
    "select_adaptation_frames",
]


@dataclass(frozen=True)
class RefineConfig:
    """Knobs of the refinement sweep.

    threshold        posterior cut for declaring a channel active (strict >)
    alpha            retention ratio each speaker must exceed for an update
                     to be accepted (strict >)
    min_pair_frames  pairs with fewer selected frames are skipped outright
    passes           number of full sweeps over all speaker pairs
    k_prime          backend capacity; only two-speaker backends exist here
    """

    threshold: float = 0.5
    alpha: float = 0.5
    min_pair_frames: int = 50
    passes: int = 1
    k_prime: int = 2

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.min_pair_frames < 0:
            raise ValueError(f"min_pair_frames must be >= 0, got {self.min_pair_frames}")
        if self.passes < 1:
            raise ValueError(f"passes must be >= 1, got {self.passes}")
        if self.k_prime != 2:
            raise ValueError("only two-speaker backends are supported (k_prime == 2)")


SkipReason = Literal["too_few_frames", "backend_error", "gate_rejected"]


@dataclass(frozen=True)
class PairStep:
    """Audit record of one pair-refinement step."""

    pair: tuple[str, str]
    selected_count: int
    permutation: Optional[Literal["identity", "swapped"]]
    accepted: bool
    frames_added_i: int = 0
    frames_added_j: int = 0
    skipped_reason: Optional[SkipReason] = None
    pass_index: int = 0

    def __post_init__(self) -> None:
        if not self.accepted and (self.frames_added_i or self.frames_added_j):
            raise ValueError("frames_added must be zero when the step was not accepted")

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "selected_count": self.selected_count,
            "permutation": self.permutation,
            "accepted": self.accepted,
            "frames_added_i": self.frames_added_i,
            "frames_added_j": self.frames_added_j,
            "skipped_reason": self.skipped_reason,
            "pass_index": self.pass_index,
        }


RefineTrace = list[PairStep]


def select_pair_frames(d: Diarization, i: str, j: str) -> ActivitySet:
    """Frames in which no speaker other than ``i`` and ``j`` is active.

    Silence frames qualify: the selection is the complement of the union of
    all third-speaker activities, not the union of the pair's own.
    """
    if i == j:
        raise ValueError(f"pair must name two distinct speakers, got {i!r} twice")
    ids = d.speaker_ids
    if i not in ids or j not in ids:
        missing = [s for s in (i, j) if s not in ids]
        raise KeyError(f"unknown speaker id(s): {missing}")
    others = np.zeros(d.grid.total_frames, dtype=bool)
    for k in ids:
        if k != i and k != j:
            others |= d.activity(k).mask
    return ActivitySet(~others)


def order_pairs(d: Diarization) -> list[tuple[str, str]]:
    """All speaker pairs, most selected frames first; ties lexicographic.

    The ranking is computed once, on the diarization given here; callers that
    update the diarization while iterating must not expect the order to track
    those updates.
    """
    pairs = list(combinations(sorted(d.speaker_ids), 2))
    return sorted(pairs, key=lambda p: (-select_pair_frames(d, *p).count, p))


def threshold_posteriors(
    p: PosteriorMatrix, threshold: float, total_frames: int
) -> tuple[ActivitySet, ActivitySet]:
    """Cut each posterior channel at ``threshold`` (strictly greater).

    Returns full-grid activity sets that are active only on selected frames.
    """
    sets = []
    for channel in (0, 1):
        mask = np.zeros(total_frames, dtype=bool)
        mask[p.frame_indices[p.values[:, channel] > threshold]] = True
        sets.append(ActivitySet(mask))
    return sets[0], sets[1]


def similarity(u: ActivitySet, v: ActivitySet) -> int:
    """Agreement of two activity sets: shared speech plus shared silence.

    Equals ``total_frames - |u XOR v|``.
    """
    if u.total_frames != v.total_frames:
        raise GridMismatchError(
            f"activity sets span {u.total_frames} vs {v.total_frames} frames"
        )
    return u.total_frames - int(np.count_nonzero(u.mask ^ v.mask))


def resolve_permutation(
    q_a: ActivitySet,
    q_b: ActivitySet,
    t_i: ActivitySet,
    t_j: ActivitySet,
) -> tuple[ActivitySet, ActivitySet, Literal["identity", "swapped"]]:
    """Assign the backend's anonymous channels to the pair's speakers.

    Picks whichever of the two assignments agrees more with the current
    activities; on a tie the identity assignment (a->i, b->j) wins.
    """
    keep = similarity(q_a, t_i) + similarity(q_b, t_j)
    swap = similarity(q_b, t_i) + similarity(q_a, t_j)
    if swap > keep:
        return q_b, q_a, "swapped"
    return q_a, q_b, "identity"


def check_acceptance(
    new_i: ActivitySet,
    new_j: ActivitySet,
    t_i: ActivitySet,
    t_j: ActivitySet,
    selected: ActivitySet,
    alpha: float,
) -> bool:
    """Retention gate: each speaker must keep more than ``alpha`` of its
    previous activity within the selected frames.

    A speaker with no previous activity inside the selection fails its
    condition — there is no evidence the backend was tracking that speaker
    at all, so the update is rejected.
    """
    for new, old in ((new_i, t_i), (new_j, t_j)):
        previous = old & selected
        if previous.count == 0:
            return False
        if (new & previous).count <= alpha * previous.count:
            return False
    return True


def apply_update(
    d: Diarization,
    i: str,
    j: str,
    new_i: ActivitySet,
    new_j: ActivitySet,
    selected: ActivitySet,
) -> Diarization:
    """Fold an accepted pair re-estimate back into the diarization.

    With exactly two speakers the re-estimate replaces the pair's activities
    wholesale (frames outside the selection, of which there are none when the
    selection covers the grid, are carried over).  With three or more
    speakers only the frames the backend judged *overlapped* are added to
    both speakers; single-speaker decisions are left to the clustering stage,
    which handles them well already.
    """
    if d.num_speakers == 2:
        outside = ~selected
        updated_i = new_i | outside
        updated_j = new_j | outside
    else:
        both = new_i & new_j
        updated_i = d.activity(i) | both
        updated_j = d.activity(j) | both
    return d.with_activity(i, updated_i).with_activity(j, updated_j)


def refine_recording(
    initial: Diarization,
    backend,
    config: RefineConfig = RefineConfig(),
    recording_id: str = "recording",
) -> tuple[Diarization, RefineTrace]:
    """Run ``config.passes`` refinement sweeps over all speaker pairs.

    Backend failures and undersized selections skip the affected pair and
    are recorded in the trace; the sweep continues.  A diarization with a
    single speaker is returned unchanged.  The result is deterministic
    whenever the backend is.
    """
    for speaker in initial.speaker_ids:
        if initial.activity(speaker).count == 0:
            raise ValueError(f"speaker {speaker!r} has no active frames")

    current = initial
    trace: RefineTrace = []
    total = initial.grid.total_frames
    for pass_index in range(config.passes):
        for i, j in order_pairs(current):
            selected = select_pair_frames(current, i, j)
            count = selected.count
            if count == 0 or count < config.min_pair_frames:
                trace.append(
                    PairStep((i, j), count, None, False,
                             skipped_reason="too_few_frames", pass_index=pass_index)
                )
                continue
            request = PosteriorRequest(
                recording_id, selected.frames, initial.grid.frame_shift_ms
            )
            try:
                posteriors = backend.infer(request)
                if not np.array_equal(posteriors.frame_indices, request.frame_indices):
                    raise BackendError("backend answered for different frames")
            except BackendError:
                trace.append(
                    PairStep((i, j), count, None, False,
                             skipped_reason="backend_error", pass_index=pass_index)
                )
                continue
            q_a, q_b = threshold_posteriors(posteriors, config.threshold, total)
            t_i, t_j = current.activity(i), current.activity(j)
            new_i, new_j, permutation = resolve_permutation(q_a, q_b, t_i, t_j)
            if not check_acceptance(new_i, new_j, t_i, t_j, selected, config.alpha):
                trace.append(
                    PairStep((i, j), count, permutation, False,
                             skipped_reason="gate_rejected", pass_index=pass_index)
                )
                continue
            current = apply_update(current, i, j, new_i, new_j, selected)
            trace.append(
                PairStep(
                    (i, j), count, permutation, True,
                    frames_added_i=(current.activity(i) - t_i).count,
                    frames_added_j=(current.activity(j) - t_j).count,
                    pass_index=pass_index,
                )
            )
    return current, trace


def select_adaptation_frames(
    reference: Diarization, chunk_start: int, chunk_end: int
) -> tuple[ActivitySet, tuple[str, ...]]:
    """Pick the chunk's two dominant speakers and the frames usable for them.

    Within ``[chunk_start, chunk_end)`` the two speakers with the most active
    frames are chosen (ties resolved lexicographically); returned frames are
    the chunk minus any other speaker's activity.  Chunks with fewer than two
    active speakers yield a shorter id tuple and, with none, an error.
    """
    total = reference.grid.total_frames
    if not 0 <= chunk_start < chunk_end <= total:
        raise ValueError(
            f"chunk [{chunk_start}, {chunk_end}) is empty or outside [0, {total})"
        )
    counts = {
        s: int(np.count_nonzero(reference.activity(s).mask[chunk_start:chunk_end]))
        for s in reference.speaker_ids
    }
    active = [s for s in reference.speaker_ids if counts[s] > 0]
    if not active:
        raise ValueError("chunk contains no active frames")
    dominant = tuple(sorted(active, key=lambda s: (-counts[s], s))[:2])

    mask = np.zeros(total, dtype=bool)
    mask[chunk_start:chunk_end] = True
    for s in reference.speaker_ids:
        if s not in dominant:
            mask &= ~reference.activity(s).mask
    return ActivitySet(mask), dominant
