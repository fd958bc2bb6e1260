"""Small constructors and oracles shared across test modules."""

from itertools import permutations

from diarefine.timeline import ActivitySet, Diarization, FrameGrid


def aset(total: int, frames) -> ActivitySet:
    return ActivitySet.from_frames(frames, total)


def diar(total: int, speakers: dict, shift_ms: int = 100) -> Diarization:
    """Diarization from {speaker_id: iterable of active frames}."""
    grid = FrameGrid(shift_ms, total)
    return Diarization(
        grid, tuple((sid, aset(total, frames)) for sid, frames in speakers.items())
    )


def random_diar(rng, total: int, n_speakers: int, prefix: str) -> Diarization:
    """Uniformly random activity sets, possibly empty, possibly overlapping."""
    speakers = {}
    for k in range(n_speakers):
        n = int(rng.integers(0, total))
        frames = rng.choice(total, size=n, replace=False)
        speakers[f"{prefix}{k}"] = sorted(int(f) for f in frames)
    return diar(total, speakers)


def brute_force_total_overlap(ref: Diarization, hyp: Diarization) -> int:
    """Exhaustive best one-to-one assignment score, the mapping oracle."""
    r = ref.activity_matrix().astype(int)
    h = hyp.activity_matrix().astype(int)
    overlap = r @ h.T
    kr, kh = overlap.shape
    if kr == 0 or kh == 0:
        return 0
    best = 0
    if kr <= kh:
        for perm in permutations(range(kh), kr):
            best = max(best, sum(overlap[i, perm[i]] for i in range(kr)))
    else:
        for perm in permutations(range(kr), kh):
            best = max(best, sum(overlap[perm[j], j] for j in range(kh)))
    return best
