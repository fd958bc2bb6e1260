"""Command-line pipelines: refine, score, simulate, select-frames.

Every command is deterministic given its flags and inputs — recordings are
processed in sorted order, files are written atomically, and all randomness
flows from explicit seeds — so identical invocations produce byte-identical
outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

from .backends import FileBackend, NoiseSpec, OracleBackend, SubprocessBackend
from .refine import RefineConfig, RefineTrace, refine_recording, select_adaptation_frames
from .rttm import parse_rttm, parse_uem, rttm_to_diarization, emit_rttm, records_total_frames
from .scoring import compute_der, format_report_line, format_report_table, aggregate_reports
from .simulate import SceneSpec, degrade_to_clustering, generate_scene
from .timeline import Diarization, frames_to_spans, seconds_to_ms

log = logging.getLogger("diarefine")


def _write_text_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _load_rttm(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_rttm(fh)


def _make_backend_factory(args: argparse.Namespace) -> Callable[[], object]:
    """One backend session per recording worker, as sessions are not
    shareable across threads."""
    if args.backend == "oracle":
        references = {
            recording: rttm_to_diarization(records, frame_shift_ms=args.frame_shift_ms)
            for recording, records in _load_rttm(args.reference).items()
        }
        noise = NoiseSpec(
            epsilon=args.oracle_epsilon,
            flip_prob=args.oracle_flip_prob,
            jitter=args.oracle_jitter,
        )
        return lambda: OracleBackend(
            references, noise, seed=args.seed, channel_policy=args.oracle_channel_policy
        )
    if args.backend == "file":
        return lambda: FileBackend(args.posterior_dir)
    argv = shlex.split(args.cmd)
    return lambda: SubprocessBackend(argv, frame_shift_ms=args.frame_shift_ms)


def cmd_refine(args: argparse.Namespace) -> int:
    required = {"oracle": "reference", "file": "posterior_dir", "subprocess": "cmd"}
    flag = required[args.backend]
    if getattr(args, flag) is None:
        args.parser.error(f"--backend {args.backend} requires --{flag.replace('_', '-')}")

    config = RefineConfig(
        threshold=args.threshold,
        alpha=args.alpha,
        min_pair_frames=args.min_pair_frames,
        passes=args.passes,
    )
    initial = _load_rttm(args.init)
    factory = _make_backend_factory(args)

    def run_one(recording: str) -> tuple[str, str, RefineTrace]:
        diarization = rttm_to_diarization(
            initial[recording], frame_shift_ms=args.frame_shift_ms
        )
        backend = factory()
        try:
            refined, trace = refine_recording(
                diarization, backend, config, recording_id=recording
            )
        finally:
            backend.close()
        return recording, emit_rttm(refined, recording), trace

    recordings = sorted(initial)
    results: dict[str, tuple[str, RefineTrace]] = {}
    failures = 0
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        for recording, outcome in zip(recordings, pool.map(
            lambda r: _guarded(run_one, r), recordings
        )):
            if isinstance(outcome, Exception):
                log.error("refinement failed for %s: %s", recording, outcome)
                failures += 1
            else:
                _, rttm_text, trace = outcome
                results[recording] = (rttm_text, trace)

    _write_text_atomic(args.out, "".join(results[r][0] for r in sorted(results)))
    if args.trace:
        lines = []
        for recording in sorted(results):
            for step in results[recording][1]:
                lines.append(
                    json.dumps({"recording": recording, **step.to_dict()}, sort_keys=True)
                )
        _write_text_atomic(args.trace, "".join(line + "\n" for line in lines))
    return 1 if failures else 0


def _guarded(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # noqa: BLE001 - per-recording isolation
        return exc


def cmd_score(args: argparse.Namespace) -> int:
    ref_records = _load_rttm(args.ref)
    hyp_records = _load_rttm(args.hyp)
    uem = None
    if args.uem:
        with open(args.uem, "r", encoding="utf-8") as fh:
            uem = parse_uem(fh)

    rows = []
    recordings = sorted(ref_records)
    if uem is not None:
        recordings = [r for r in recordings if r in uem]
    for recording in recordings:
        total = records_total_frames(ref_records[recording], args.frame_shift_ms)
        if recording in hyp_records:
            total = max(
                total, records_total_frames(hyp_records[recording], args.frame_shift_ms)
            )
        ref = rttm_to_diarization(
            ref_records[recording], frame_shift_ms=args.frame_shift_ms, total_frames=total
        )
        if recording in hyp_records:
            hyp = rttm_to_diarization(
                hyp_records[recording],
                frame_shift_ms=args.frame_shift_ms,
                total_frames=total,
            )
        else:
            log.warning("recording %s missing from hypothesis; scoring all-miss", recording)
            hyp = Diarization(ref.grid, ())
        report = compute_der(
            ref, hyp, collar_seconds=args.collar,
            uem=None if uem is None else uem[recording],
        )
        rows.append((recording, report))
    if not rows:
        log.error("no recordings to score")
        return 1

    print(format_report_table(rows))
    print()
    for name, report in rows:
        print(format_report_line(name, report))
    if len(rows) > 1:
        print(format_report_line("OVERALL", aggregate_reports(r for _, r in rows)))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = SceneSpec(
        num_speakers=args.speakers,
        total_duration=args.duration,
        target_overlap_ratio=args.overlap,
        mean_turn=args.mean_turn,
        mean_gap=args.mean_gap,
        seed=args.seed,
        frame_shift_ms=args.frame_shift_ms,
    )
    reference = generate_scene(spec)
    initial = degrade_to_clustering(reference, args.confusion, seed=args.seed)
    _write_text_atomic(args.out_ref, emit_rttm(reference, args.recording_id))
    _write_text_atomic(args.out_init, emit_rttm(initial, args.recording_id))
    return 0


def cmd_select_frames(args: argparse.Namespace) -> int:
    by_recording = _load_rttm(args.ref)
    if args.recording is not None:
        if args.recording not in by_recording:
            args.parser.error(f"recording {args.recording!r} not present in {args.ref}")
        recording = args.recording
    elif len(by_recording) == 1:
        recording = next(iter(by_recording))
    else:
        args.parser.error("input holds several recordings; pick one with --recording")
    reference = rttm_to_diarization(
        by_recording[recording], frame_shift_ms=args.frame_shift_ms
    )
    shift = args.frame_shift_ms
    start = seconds_to_ms(args.chunk_start) // shift
    end = min(
        reference.grid.total_frames,
        start + -(-seconds_to_ms(args.chunk_len) // shift),
    )
    selection, dominant = select_adaptation_frames(reference, start, end)
    payload = {
        "recording": recording,
        "frame_shift_ms": shift,
        "chunk": [start, end],
        "speakers": list(dominant),
        "frames": [list(span) for span in frames_to_spans(selection)],
    }
    _write_text_atomic(args.out, json.dumps(payload, sort_keys=True) + "\n")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--frame-shift-ms", type=int, default=100,
                        help="frame grid resolution (default 100)")
    shared.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    shared.add_argument("--log-level", default="warning",
                        choices=("debug", "info", "warning", "error"))

    parser = argparse.ArgumentParser(
        prog="diarefine",
        description="Recover overlapped speech in clustering-based diarization "
                    "output by pairwise re-estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", parents=[shared],
                       help="refine an initial RTTM with a two-speaker backend")
    p.add_argument("--init", required=True, help="initial diarization RTTM")
    p.add_argument("--backend", required=True, choices=("oracle", "file", "subprocess"))
    p.add_argument("--reference", help="reference RTTM (oracle backend)")
    p.add_argument("--posterior-dir", help="directory of .post files (file backend)")
    p.add_argument("--cmd", help="worker command line (subprocess backend)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--min-pair-frames", type=int, default=50)
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--out", required=True, help="refined RTTM output path")
    p.add_argument("--trace", help="JSON-lines audit trail of every pair step")
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent recordings (default 1)")
    p.add_argument("--oracle-epsilon", type=float, default=0.01)
    p.add_argument("--oracle-flip-prob", type=float, default=0.0)
    p.add_argument("--oracle-jitter", type=float, default=0.0)
    p.add_argument("--oracle-channel-policy", default="hash",
                   choices=("hash", "identity", "swap"))
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("score", parents=[shared],
                       help="frame-level DER/JER of hypothesis against reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--collar", type=float, default=0.0,
                   help="ignore frames within this many seconds of reference "
                        "segment boundaries (DER only)")
    p.add_argument("--uem", help="score only these regions; recordings absent "
                                 "from the UEM are skipped")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", parents=[shared],
                       help="generate a synthetic scene and its degraded hypothesis")
    p.add_argument("--speakers", type=int, required=True)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--overlap", type=float, default=0.17,
                   help="target overlapped fraction of speech (default 0.17)")
    p.add_argument("--confusion", type=float, default=0.0,
                   help="label corruption rate of the degraded hypothesis")
    p.add_argument("--mean-turn", type=float, default=2.0)
    p.add_argument("--mean-gap", type=float, default=0.4)
    p.add_argument("--recording-id", default="synthetic")
    p.add_argument("--out-ref", required=True)
    p.add_argument("--out-init", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("select-frames", parents=[shared],
                       help="dominant-pair frame selection for a chunk")
    p.add_argument("--ref", required=True)
    p.add_argument("--recording", help="recording id when the RTTM has several")
    p.add_argument("--chunk-start", type=float, required=True, help="seconds")
    p.add_argument("--chunk-len", type=float, required=True, help="seconds")
    p.add_argument("--out", required=True, help="JSON output path")
    p.set_defaults(func=cmd_select_frames)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    level = os.environ.get("DIAR_REFINE_LOG", args.log_level)
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING))
    args.parser = parser
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
