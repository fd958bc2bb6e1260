/**
 * Posteriors a perfect two-speaker model would emit for a reference
 * diarization, plus controllable noise.
 *
 * This is a faithful port of the host's in-process oracle: given the same
 * reference RTTM, seed and noise settings it produces bit-identical doubles,
 * because every random draw is keyed on (seed, recording, frame, channel)
 * through the same hash construction and the float pipeline applies the same
 * IEEE-754 operations in the same order.
 */

import { fnv1a64, frameUniform, keyBit } from "./hashrand.js";
import { Reference } from "./rttm.js";

export type ChannelPolicy = "hash" | "identity" | "swap";

export interface NoiseSpec {
  epsilon: number;
  flipProb: number;
  jitter: number;
}

export class OracleError extends Error {}

export function validateNoise(noise: NoiseSpec): NoiseSpec {
  if (!(noise.epsilon > 0 && noise.epsilon < 0.5)) {
    throw new OracleError(`epsilon must lie in (0, 0.5), got ${noise.epsilon}`);
  }
  if (!(noise.flipProb >= 0 && noise.flipProb <= 1)) {
    throw new OracleError(`flip_prob must lie in [0, 1], got ${noise.flipProb}`);
  }
  if (!(noise.jitter >= 0)) {
    throw new OracleError(`jitter must be >= 0, got ${noise.jitter}`);
  }
  return noise;
}

/**
 * Two-speaker posteriors over the requested frames.
 *
 * The two reference speakers most active within the request drive the two
 * channels (ties broken lexicographically); active frames get `1 - epsilon`,
 * inactive frames `epsilon`, then per-frame flips, uniform jitter and a clamp
 * to [0, 1] — in that order, with noise keyed to the speaker-side channel.
 * The optional channel permutation is applied last, so a swapped worker and
 * an identity worker describe the same two speakers in opposite order with
 * identical underlying draws.  Frames past the reference extent are silence.
 */
export function oraclePosteriors(
  reference: Reference,
  recordingId: string,
  frames: number[],
  shiftMs: number,
  noise: NoiseSpec,
  seed: number,
  policy: ChannelPolicy,
): number[][] {
  if (shiftMs !== reference.frameShiftMs) {
    throw new OracleError(
      `request shift ${shiftMs} ms does not match reference grid ` +
        `${reference.frameShiftMs} ms`,
    );
  }
  const total = reference.totalFrames;

  const activeAt = (mask: Uint8Array): Uint8Array => {
    const active = new Uint8Array(frames.length);
    for (let i = 0; i < frames.length; i++) {
      const f = frames[i];
      active[i] = f < total && mask[f] === 1 ? 1 : 0;
    }
    return active;
  };

  const ranked = reference.speakers
    .map((speaker) => {
      const active = activeAt(speaker.mask);
      let count = 0;
      for (const bit of active) count += bit;
      return { id: speaker.id, active, count };
    })
    .sort((a, b) => (a.count !== b.count ? b.count - a.count : a.id < b.id ? -1 : 1));
  const chosen = ranked.slice(0, 2);

  const flipPrefix = fnv1a64(`${seed}|${recordingId}|flip`);
  const jitterPrefix = fnv1a64(`${seed}|${recordingId}|jitter`);

  const columns: Float64Array[] = [];
  for (let channel = 0; channel < 2; channel++) {
    const active = channel < chosen.length ? chosen[channel].active : new Uint8Array(frames.length);
    const q = new Float64Array(frames.length);
    for (let i = 0; i < frames.length; i++) {
      let value = active[i] === 1 ? 1.0 - noise.epsilon : noise.epsilon;
      if (noise.flipProb > 0) {
        const u = frameUniform(flipPrefix, frames[i], channel);
        if (u < noise.flipProb) value = 1.0 - value;
      }
      if (noise.jitter > 0) {
        const u = frameUniform(jitterPrefix, frames[i], channel);
        value = value + (u * 2.0 - 1.0) * noise.jitter;
        value = Math.min(1.0, Math.max(0.0, value));
      }
      q[i] = value;
    }
    columns.push(q);
  }

  let swapped: boolean;
  if (policy === "swap") {
    swapped = true;
  } else if (policy === "identity") {
    swapped = false;
  } else {
    const first = frames[0];
    const last = frames[frames.length - 1];
    swapped = keyBit(`${seed}|${recordingId}|perm|${first}|${last}|${frames.length}`);
  }
  if (swapped) columns.reverse();

  const rows: number[][] = [];
  for (let i = 0; i < frames.length; i++) {
    rows.push([columns[0][i], columns[1][i]]);
  }
  return rows;
}
