"""Stdin/stdout posterior worker backed by a reference RTTM.

Runnable as ``python -m diarefine.echo_worker``.  Speaks the newline-delimited
JSON protocol expected by the subprocess backend: a ``hello`` line announcing
the frame grid, then exactly one response per request line.  Posteriors come
from the same oracle as the in-process backend, so with matching seed and
noise settings both produce bit-identical values — which is precisely what
makes this worker useful for exercising the subprocess plumbing.

Malformed request lines are answered with ``{"id": -1, "error": ...}``; the
worker only terminates on end of input.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import IO

from .backends import BackendError, NoiseSpec, PosteriorRequest, oracle_posteriors
from .rttm import parse_rttm, rttm_to_diarization
from .timeline import Diarization, spans_to_frame_indices


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m diarefine.echo_worker",
        description="Serve oracle posteriors over the JSON-lines wire protocol.",
    )
    parser.add_argument("--reference", required=True, help="reference RTTM file")
    parser.add_argument("--frame-shift-ms", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epsilon", type=float, default=0.01)
    parser.add_argument("--flip-prob", type=float, default=0.0)
    parser.add_argument("--jitter", type=float, default=0.0)
    parser.add_argument(
        "--channel-policy", choices=("hash", "identity", "swap"), default="hash"
    )
    return parser


def serve(
    references: dict[str, Diarization],
    *,
    frame_shift_ms: int,
    noise: NoiseSpec,
    seed: int,
    channel_policy: str,
    stdin: IO[str],
    stdout: IO[str],
) -> None:
    def emit(payload: dict) -> None:
        stdout.write(json.dumps(payload, sort_keys=True) + "\n")
        stdout.flush()

    emit({"hello": {"shift_ms": frame_shift_ms}})
    for raw in stdin:
        if not raw.strip():
            continue
        try:
            message = json.loads(raw)
            if not isinstance(message, dict):
                raise ValueError("request must be a JSON object")
        except ValueError as exc:
            emit({"id": -1, "error": f"bad request line: {exc}"})
            continue
        request_id = message.get("id")
        if not isinstance(request_id, int):
            emit({"id": -1, "error": "request id missing or not an integer"})
            continue
        try:
            recording = message["recording"]
            indices = spans_to_frame_indices(message["frames"])
            shift = int(message["shift_ms"])
        except (KeyError, TypeError, ValueError) as exc:
            emit({"id": request_id, "error": f"invalid request: {exc}"})
            continue
        if indices.size == 0:
            emit({"id": request_id, "error": "empty frame selection"})
            continue
        reference = references.get(recording)
        if reference is None:
            emit({"id": request_id, "error": f"unknown recording {recording!r}"})
            continue
        try:
            posteriors = oracle_posteriors(
                reference,
                PosteriorRequest(recording, indices, shift),
                noise,
                seed,
                channel_policy,  # type: ignore[arg-type]
            )
        except (BackendError, ValueError) as exc:
            emit({"id": request_id, "error": str(exc)})
            continue
        emit({"id": request_id, "posteriors": posteriors.values.tolist()})


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    with open(args.reference, "r", encoding="utf-8") as fh:
        by_recording = parse_rttm(fh)
    references = {
        recording: rttm_to_diarization(records, frame_shift_ms=args.frame_shift_ms)
        for recording, records in by_recording.items()
    }
    serve(
        references,
        frame_shift_ms=args.frame_shift_ms,
        noise=NoiseSpec(epsilon=args.epsilon, flip_prob=args.flip_prob, jitter=args.jitter),
        seed=args.seed,
        channel_policy=args.channel_policy,
        stdin=sys.stdin,
        stdout=sys.stdout,
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
