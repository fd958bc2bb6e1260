"""Overlap-aware refinement of clustering-based speaker diarization.

Clustering systems assign each frame to at most one speaker, so overlapped
speech is structurally missed.  This package re-examines every speaker pair
with a two-speaker posterior backend on exactly the frames where no third
speaker is active, resolves the backend's channel permutation against the
existing result, and folds accepted re-estimates back in — recovering
overlaps while leaving single-speaker decisions intact.
"""

from .backends import (
    BackendError,
    FileBackend,
    NoiseSpec,
    OracleBackend,
    PosteriorRequest,
    ProtocolError,
    SubprocessBackend,
    oracle_posteriors,
)
from .refine import PairStep, RefineConfig, refine_recording
from .rttm import RttmParseError, RttmRecord, UemRegion, emit_rttm, parse_rttm, parse_uem, rttm_to_diarization
from .scoring import ScoreReport, compute_der, compute_jer, optimal_mapping
from .simulate import SceneSpec, degrade_to_clustering, generate_scene, overlap_ratio
from .timeline import ActivitySet, Diarization, FrameGrid, GridMismatchError, PosteriorMatrix

__version__ = "0.1.0"

__all__ = [
    "ActivitySet",
    "BackendError",
    "Diarization",
    "FileBackend",
    "FrameGrid",
    "GridMismatchError",
    "NoiseSpec",
    "OracleBackend",
    "PairStep",
    "PosteriorMatrix",
    "PosteriorRequest",
    "ProtocolError",
    "RefineConfig",
    "RttmParseError",
    "RttmRecord",
    "ScoreReport",
    "SceneSpec",
    "SubprocessBackend",
    "UemRegion",
    "compute_der",
    "compute_jer",
    "degrade_to_clustering",
    "emit_rttm",
    "generate_scene",
    "optimal_mapping",
    "oracle_posteriors",
    "overlap_ratio",
    "parse_rttm",
    "parse_uem",
    "refine_recording",
    "rttm_to_diarization",
    "__version__",
]
