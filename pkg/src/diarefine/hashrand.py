"""Deterministic, order-independent randomness derived from string keys.

Every draw is a pure function of its key, so identical keys give identical
draws in any process, in any language, and regardless of request order.
Out-of-process posterior workers rely on this to reproduce the in-process
oracle bit for bit. The construction is fixed:

* ``fnv1a64``: FNV-1a over the key's UTF-8 bytes.
* ``mix64``: the splitmix64 finalizer.
* scalar draw: ``mix64(fnv1a64(key))``.
* per-frame draw: ``mix64(fnv1a64(prefix) ^ (frame * GOLDEN) ^ (channel * SILVER))``
  with all arithmetic modulo 2**64.
* a 64-bit hash becomes a float in [0, 1) via ``(h >> 11) * 2**-53``.
"""

from __future__ import annotations

import numpy as np

__all__ = ["fnv1a64", "mix64", "key_hash", "key_uniform", "key_bit", "frame_uniforms"]

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_GOLDEN = 0x9E3779B97F4A7C15
_SILVER = 0xC2B2AE3D27D4EB4F


def fnv1a64(key: str) -> int:
    """64-bit FNV-1a hash of the key's UTF-8 bytes."""
    h = _FNV_OFFSET
    for byte in key.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def mix64(z: int) -> int:
    """splitmix64 finalizer; a strong 64-bit bijective mixer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def key_hash(key: str) -> int:
    return mix64(fnv1a64(key))


def key_uniform(key: str) -> float:
    """Uniform draw in [0, 1) determined entirely by the key."""
    return (key_hash(key) >> 11) * 2.0**-53


def key_bit(key: str) -> bool:
    """Fair coin determined entirely by the key."""
    return bool(key_hash(key) & 1)


def frame_uniforms(prefix: str, frames: np.ndarray, channel: int) -> np.ndarray:
    """Vector of uniforms in [0, 1), one per frame index.

    ``prefix`` scopes the stream (e.g. seed, recording and draw kind);
    ``channel`` separates the two posterior channels. Equivalent to a scalar
    draw per frame but computed with vectorized uint64 arithmetic.
    """
    base = np.uint64(fnv1a64(prefix))
    idx = np.asarray(frames, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = base ^ (idx * np.uint64(_GOLDEN)) ^ (np.uint64(channel) * np.uint64(_SILVER))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
