"""Pluggable providers of two-speaker posteriors over arbitrary frame subsets.

Three session kinds are provided:

* :class:`OracleBackend` — derives posteriors from a reference diarization,
  with controllable noise; the verification instrument for the refiner.
* :class:`FileBackend` — slices precomputed full-grid posteriors from disk.
* :class:`SubprocessBackend` — talks newline-delimited JSON to an
  out-of-process worker over stdin/stdout.

All backends return posteriors for exactly the requested frame indices; the
selected frames need not be contiguous in time.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Mapping, Sequence

import numpy as np

from .hashrand import frame_uniforms, key_bit
from .timeline import Diarization, PosteriorMatrix

__all__ = [
    "BackendError",
    "ProtocolError",
    "NoiseSpec",
    "PosteriorRequest",
    "ChannelPolicy",
    "oracle_posteriors",
    "OracleBackend",
    "FileBackend",
    "SubprocessBackend",
    "write_posterior_file",
    "read_posterior_file",
]


class BackendError(RuntimeError):
    """A backend could not serve a request; the offending pair is skippable."""


class ProtocolError(BackendError):
    """An external provider violated the wire contract."""


ChannelPolicy = Literal["hash", "identity", "swap"]


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption applied to oracle posteriors, in this order:
    base value, per-frame flips, uniform jitter, clamp to [0, 1]."""

    epsilon: float = 0.01
    flip_prob: float = 0.0
    jitter: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        if self.jitter < 0.0:
            raise ValueError(f"jitter must be >= 0, got {self.jitter}")


@dataclass(frozen=True)
class PosteriorRequest:
    """Selected frames of one recording for which posteriors are wanted."""

    recording_id: str
    frame_indices: np.ndarray
    frame_shift_ms: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.frame_indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("frame_indices must be non-empty")
        if idx[0] < 0 or np.any(np.diff(idx) <= 0):
            raise ValueError("frame_indices must be non-negative and strictly ascending")
        if self.frame_shift_ms <= 0:
            raise ValueError(f"frame_shift_ms must be positive, got {self.frame_shift_ms}")
        idx.setflags(write=False)
        object.__setattr__(self, "frame_indices", idx)


def oracle_posteriors(
    reference: Diarization,
    request: PosteriorRequest,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    channel_policy: ChannelPolicy = "hash",
) -> PosteriorMatrix:
    """Posteriors a perfect two-speaker model would emit, plus optional noise.

    The two reference speakers most active within the requested frames drive
    the two channels (ties broken lexicographically by speaker id): active
    frames get ``1 - epsilon``, inactive frames ``epsilon``. With policy
    ``hash`` the output channels are swapped on a per-request coin so that
    downstream permutation resolution is actually exercised; ``identity`` and
    ``swap`` force one order. All randomness is keyed on
    ``(seed, recording_id, frame)`` and is reproducible in any process.
    """
    idx = request.frame_indices
    total = reference.grid.total_frames
    if request.frame_shift_ms != reference.grid.frame_shift_ms:
        raise BackendError(
            f"request shift {request.frame_shift_ms} ms does not match "
            f"reference grid {reference.grid.frame_shift_ms} ms"
        )
    # Frames past the reference extent are silence: the requester's grid may
    # outlive the last reference segment.
    in_range = idx < total

    def active_at(speaker: str) -> np.ndarray:
        active = np.zeros(idx.size, dtype=bool)
        active[in_range] = reference.activity(speaker).mask[idx[in_range]]
        return active

    ranked = sorted(
        reference.speaker_ids,
        key=lambda s: (-int(np.count_nonzero(active_at(s))), s),
    )
    chosen = ranked[:2]

    columns = []
    for channel in (0, 1):
        if channel < len(chosen):
            active = active_at(chosen[channel])
        else:
            active = np.zeros(idx.size, dtype=bool)
        q = np.where(active, 1.0 - noise.epsilon, noise.epsilon)
        if noise.flip_prob > 0.0:
            u = frame_uniforms(f"{seed}|{request.recording_id}|flip", idx, channel)
            q = np.where(u < noise.flip_prob, 1.0 - q, q)
        if noise.jitter > 0.0:
            u = frame_uniforms(f"{seed}|{request.recording_id}|jitter", idx, channel)
            q = np.clip(q + (u * 2.0 - 1.0) * noise.jitter, 0.0, 1.0)
        columns.append(q)

    if channel_policy == "swap":
        swapped = True
    elif channel_policy == "identity":
        swapped = False
    else:
        swapped = key_bit(
            f"{seed}|{request.recording_id}|perm|{int(idx[0])}|{int(idx[-1])}|{idx.size}"
        )
    if swapped:
        columns.reverse()
    return PosteriorMatrix(idx, np.stack(columns, axis=1))


class OracleBackend:
    """In-process oracle session over a set of reference diarizations."""

    kind = "oracle"

    def __init__(
        self,
        references: Mapping[str, Diarization],
        noise: NoiseSpec = NoiseSpec(),
        seed: int = 0,
        channel_policy: ChannelPolicy = "hash",
    ):
        self._references = dict(references)
        self._noise = noise
        self._seed = seed
        self._policy = channel_policy

    def infer(self, request: PosteriorRequest) -> PosteriorMatrix:
        reference = self._references.get(request.recording_id)
        if reference is None:
            raise BackendError(f"no reference for recording {request.recording_id!r}")
        return oracle_posteriors(reference, request, self._noise, self._seed, self._policy)

    def close(self) -> None:
        pass

    def __enter__(self) -> "OracleBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_posterior_file(
    path: str | Path,
    frame_shift_ms: int,
    total_frames: int,
    frame_indices: np.ndarray,
    values: np.ndarray,
) -> None:
    """Write full-precision posteriors: header, then ``<frame> <qa> <qb>`` lines.

    Float values are printed with shortest round-trip precision, so reading
    the file back reproduces them exactly.
    """
    idx = np.asarray(frame_indices, dtype=np.int64)
    vals = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#frames={total_frames} shift_ms={frame_shift_ms}\n")
        for frame, (qa, qb) in zip(idx, vals):
            fh.write(f"{int(frame)} {float(qa)!r} {float(qb)!r}\n")


def read_posterior_file(path: str | Path) -> tuple[int, int, np.ndarray, np.ndarray]:
    """Read a posterior file; returns (total_frames, shift_ms, frames, values)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        parts = dict(
            item.split("=", 1) for item in header.lstrip("#").split() if "=" in item
        )
        try:
            total_frames = int(parts["frames"])
            shift_ms = int(parts["shift_ms"])
        except (KeyError, ValueError):
            raise ProtocolError(f"bad posterior file header: {header!r}") from None
        frames: list[int] = []
        values: list[tuple[float, float]] = []
        for line_number, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 3:
                raise ProtocolError(f"bad posterior line {line_number}: {raw!r}")
            frames.append(int(fields[0]))
            values.append((float(fields[1]), float(fields[2])))
    return (
        total_frames,
        shift_ms,
        np.asarray(frames, dtype=np.int64),
        np.asarray(values, dtype=np.float64).reshape(len(values), 2),
    )


class FileBackend:
    """Slices precomputed posteriors stored as ``<dir>/<recording_id>.post``."""

    kind = "file"

    def __init__(self, directory: str | Path):
        self._directory = Path(directory)
        self._cache: dict[str, tuple[int, int, np.ndarray, np.ndarray]] = {}

    def _load(self, recording_id: str) -> tuple[int, int, np.ndarray, np.ndarray]:
        if recording_id not in self._cache:
            path = self._directory / f"{recording_id}.post"
            if not path.exists():
                raise BackendError(f"no posterior file for recording {recording_id!r}")
            self._cache[recording_id] = read_posterior_file(path)
        return self._cache[recording_id]

    def infer(self, request: PosteriorRequest) -> PosteriorMatrix:
        total_frames, shift_ms, frames, values = self._load(request.recording_id)
        if shift_ms != request.frame_shift_ms:
            raise BackendError(
                f"stored shift {shift_ms} ms does not match request {request.frame_shift_ms} ms"
            )
        idx = request.frame_indices
        if idx[-1] >= total_frames:
            raise BackendError(
                f"requested frame {int(idx[-1])} outside stored range of {total_frames}"
            )
        positions = np.searchsorted(frames, idx)
        if np.any(positions >= frames.size) or np.any(frames[np.minimum(positions, frames.size - 1)] != idx):
            raise BackendError("requested frames missing from posterior file")
        return PosteriorMatrix(idx, values[positions])

    def close(self) -> None:
        pass

    def __enter__(self) -> "FileBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class SubprocessBackend:
    """Session speaking newline-delimited JSON to a posterior worker.

    Wire format (one request in flight):

    * handshake, worker to host at startup: ``{"hello": {"shift_ms": <int>}}``
    * request: ``{"id": <int>, "recording": <str>, "frames": [[start, len], ...],
      "shift_ms": <int>}`` with ascending run-length spans
    * response: ``{"id": <int>, "posteriors": [[qa, qb], ...]}`` covering the
      spans in ascending frame order, or ``{"id": <int>, "error": <str>}``.
    """

    kind = "subprocess"

    def __init__(self, argv: Sequence[str], frame_shift_ms: int, timeout_s: float = 30.0):
        self._timeout = timeout_s
        self._next_id = 0
        self._proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            hello = json.loads(self._read_line())
            shift = hello["hello"]["shift_ms"]
        except (BackendError, ValueError, KeyError, TypeError) as exc:
            self.close()
            raise BackendError(f"worker handshake failed: {exc}") from None
        if shift != frame_shift_ms:
            self.close()
            raise BackendError(
                f"worker grid {shift} ms does not match expected {frame_shift_ms} ms"
            )

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _read_line(self) -> str:
        try:
            line = self._lines.get(timeout=self._timeout)
        except queue.Empty:
            raise BackendError(f"worker did not respond within {self._timeout} s") from None
        if line is None:
            raise BackendError("worker closed its output stream")
        return line

    def infer(self, request: PosteriorRequest) -> PosteriorMatrix:
        if self._proc.poll() is not None:
            raise BackendError(f"worker exited with code {self._proc.returncode}")
        request_id = self._next_id
        self._next_id += 1
        spans = _indices_to_spans(request.frame_indices)
        payload = json.dumps(
            {
                "id": request_id,
                "recording": request.recording_id,
                "frames": spans,
                "shift_ms": request.frame_shift_ms,
            },
            sort_keys=True,
        )
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(payload + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"could not write to worker: {exc}") from None
        try:
            response = json.loads(self._read_line())
        except ValueError as exc:
            raise ProtocolError(f"worker sent invalid JSON: {exc}") from None
        if not isinstance(response, dict) or response.get("id") != request_id:
            raise ProtocolError(f"response id does not match request {request_id}")
        if "error" in response:
            raise BackendError(f"worker error: {response['error']}")
        posteriors = response.get("posteriors")
        if not isinstance(posteriors, list) or len(posteriors) != request.frame_indices.size:
            raise ProtocolError(
                f"expected {request.frame_indices.size} posterior rows, "
                f"got {len(posteriors) if isinstance(posteriors, list) else type(posteriors)}"
            )
        try:
            values = np.asarray(posteriors, dtype=np.float64).reshape(-1, 2)
            return PosteriorMatrix(request.frame_indices, values)
        except ValueError as exc:
            raise ProtocolError(f"malformed posterior rows: {exc}") from None

    def close(self) -> None:
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self) -> "SubprocessBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _indices_to_spans(frame_indices: np.ndarray) -> list[list[int]]:
    """Run-length encode ascending frame indices into [start, length] spans."""
    idx = np.asarray(frame_indices, dtype=np.int64)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) != 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    return [[int(idx[s]), int(idx[e] - idx[s] + 1)] for s, e in zip(starts, ends)]
