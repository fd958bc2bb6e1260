"""Cross-process conformance of the Node posterior worker.

The worker under ``bridge/`` reimplements the echo oracle in another runtime
and speaks the stdio wire protocol.  These tests spawn the built worker and
hold it to the in-process oracle bit for bit, then fuzz the protocol surface.
They skip when the bridge has not been built (``cd bridge && npm install &&
npm run build``).
"""

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from diarefine.backends import (
    NoiseSpec,
    OracleBackend,
    PosteriorRequest,
    SubprocessBackend,
)
from diarefine.rttm import emit_rttm, parse_rttm, rttm_to_diarization
from diarefine.simulate import SceneSpec, generate_scene

BRIDGE_MAIN = Path(__file__).resolve().parent.parent / "bridge" / "dist" / "main.js"
SHIFT_MS = 100

pytestmark = pytest.mark.skipif(
    not BRIDGE_MAIN.exists() or shutil.which("node") is None,
    reason="bridge worker not built; run `npm install && npm run build` in bridge/",
)


@pytest.fixture(scope="module")
def reference_rttm(tmp_path_factory):
    """Two synthetic recordings emitted to one RTTM file, plus rasterized refs."""
    path = tmp_path_factory.mktemp("bridge") / "reference.rttm"
    scenes = {
        "alpha": generate_scene(SceneSpec(num_speakers=3, total_duration=45.0, seed=1)),
        "beta": generate_scene(SceneSpec(num_speakers=4, total_duration=45.0, seed=2)),
    }
    path.write_text("".join(emit_rttm(d, rec) for rec, d in scenes.items()))
    references = {
        rec: rttm_to_diarization(records, SHIFT_MS)
        for rec, records in parse_rttm(path.read_text()).items()
    }
    return path, references


def worker_argv(reference_path, **overrides):
    options = {
        "mode": "echo_oracle",
        "reference": str(reference_path),
        "seed": "3",
        "epsilon": "0.05",
        "flip-prob": "0.05",
        "jitter": "0.2",
    }
    options.update(overrides)
    argv = ["node", str(BRIDGE_MAIN)]
    for key, value in options.items():
        argv += [f"--{key}", value]
    return argv


def test_criterion_9_bridge_conformance(reference_rttm):
    path, references = reference_rttm

    # Part one: 100 random requests through the wire match the in-process
    # oracle to well beyond 12 decimal digits (JSON round-trips doubles
    # exactly, so the match should in fact be bit-for-bit).
    noise = NoiseSpec(epsilon=0.05, flip_prob=0.05, jitter=0.2)
    in_process = OracleBackend(references, noise, seed=3, channel_policy="hash")
    rng = np.random.default_rng(0xB11D6E)
    max_diff = 0.0
    with SubprocessBackend(worker_argv(path), SHIFT_MS) as remote:
        for _ in range(100):
            recording = str(rng.choice(sorted(references)))
            total = references[recording].grid.total_frames
            count = int(rng.integers(1, 60))
            frames = np.unique(rng.integers(0, total + 20, size=count))
            request = PosteriorRequest(
                recording_id=recording, frame_indices=frames, frame_shift_ms=SHIFT_MS
            )
            got = remote.infer(request).values
            want = in_process.infer(request).values
            assert got.shape == want.shape
            max_diff = max(max_diff, float(np.max(np.abs(got - want))))
            assert max_diff <= 1e-12

    # Part two: a hostile stream gets one well-formed response per line and
    # never kills the worker.
    hostile = [
        "this is not json",
        '{"id": 1, "recording":',
        "[1, 2, 3]",
        '"just a string"',
        '{"recording": "alpha", "frames": [[0, 1]], "shift_ms": 100}',
        '{"id": "seven", "recording": "alpha", "frames": [[0, 1]], "shift_ms": 100}',
        '{"id": 2, "recording": "alpha", "frames": [], "shift_ms": 100}',
        '{"id": 3, "recording": "alpha", "frames": "nope", "shift_ms": 100}',
        '{"id": 4, "recording": "alpha", "frames": [[5, 2], [0, 1]], "shift_ms": 100}',
        '{"id": 5, "recording": "missing", "frames": [[0, 1]], "shift_ms": 100}',
        '{"id": 6, "recording": "alpha", "frames": [[0, 1]], "shift_ms": 37}',
        '{"id": 7, "recording": 42, "frames": [[0, 1]], "shift_ms": 100}',
    ]
    proc = subprocess.Popen(
        worker_argv(path),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    try:
        hello = json.loads(proc.stdout.readline())
        assert hello == {"hello": {"shift_ms": SHIFT_MS}}
        for line in hostile:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            response = json.loads(proc.stdout.readline())
            assert isinstance(response, dict)
            assert "error" in response and "posteriors" not in response
            assert isinstance(response["error"], str) and response["error"]
            assert isinstance(response["id"], int)
            assert proc.poll() is None, f"worker died on: {line}"

        # still serving after all that
        probe = {"id": 99, "recording": "alpha", "frames": [[0, 3]], "shift_ms": 100}
        proc.stdin.write(json.dumps(probe) + "\n")
        proc.stdin.flush()
        reply = json.loads(proc.stdout.readline())
        assert reply["id"] == 99 and len(reply["posteriors"]) == 3
    finally:
        proc.stdin.close()
        assert proc.wait(timeout=10) == 0

    print(
        "[criterion 9] PASS — 100 wire requests matched the in-process oracle "
        f"(max |Δ| = {max_diff:.0e}); {len(hostile)} hostile lines each drew one "
        "error response with the worker still alive, clean exit on EOF"
    )


def test_unattributable_lines_answer_with_id_minus_one(reference_rttm):
    path, _ = reference_rttm
    proc = subprocess.Popen(
        worker_argv(path),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    try:
        proc.stdout.readline()  # hello
        for line in ["garbage{", "[]", '{"recording": "alpha"}', '{"id": 1.5}']:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            response = json.loads(proc.stdout.readline())
            assert response["id"] == -1
    finally:
        proc.stdin.close()
        proc.wait(timeout=10)


def test_identity_and_swap_workers_describe_the_same_speakers(reference_rttm):
    """Channel order is presentation only: the host must see identical refinement
    inputs from a swapped worker once permutation resolution has run, which
    starts with the raw columns being mirror images."""
    path, references = reference_rttm
    frames = np.arange(0, 40, 3)
    request = PosteriorRequest(
        recording_id="alpha", frame_indices=frames, frame_shift_ms=SHIFT_MS
    )
    with SubprocessBackend(worker_argv(path, **{"channel-policy": "identity"}), SHIFT_MS) as a:
        identity = a.infer(request).values
    with SubprocessBackend(worker_argv(path, **{"channel-policy": "swap"}), SHIFT_MS) as b:
        swapped = b.infer(request).values
    assert np.array_equal(identity, swapped[:, ::-1])


def test_handshake_mismatch_is_rejected_by_the_host(reference_rttm):
    path, _ = reference_rttm
    from diarefine.backends import BackendError

    with pytest.raises(BackendError, match="worker grid"):
        SubprocessBackend(worker_argv(path, **{"frame-shift-ms": "50"}), SHIFT_MS)
