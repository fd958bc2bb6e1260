/**
 * Model mode: a small per-frame network over log-mel features.
 *
 * The artifact is a JSON file describing a feed-forward stack; the final
 * layer must emit exactly two values, squashed to (0, 1) as the two speaker
 * posteriors.  Inference is frame-independent, so posteriors do not depend on
 * the order (or contiguity) of the requested frames — requests are served by
 * gathering the selected feature rows and running the stack row by row.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import {
  DEFAULT_FEATURES,
  FeatureOptions,
  gatherFrames,
  logMel,
  readWav,
  subsampleToGrid,
} from "./features.js";
import type { PosteriorSource } from "./protocol.js";

type Activation = "tanh" | "relu" | "sigmoid";

export interface Layer {
  weights: number[][]; // [out][in]
  bias: number[];
  activation: Activation;
}

export interface ModelArtifact {
  input_dim: number;
  layers: Layer[];
}

export function loadArtifact(path: string): ModelArtifact {
  const artifact = JSON.parse(readFileSync(path, "utf-8")) as ModelArtifact;
  if (!Number.isInteger(artifact.input_dim) || artifact.input_dim <= 0) {
    throw new Error(`${path}: input_dim must be a positive integer`);
  }
  if (!Array.isArray(artifact.layers) || artifact.layers.length === 0) {
    throw new Error(`${path}: layers must be a non-empty array`);
  }
  let dim = artifact.input_dim;
  for (const [i, layer] of artifact.layers.entries()) {
    if (!["tanh", "relu", "sigmoid"].includes(layer.activation)) {
      throw new Error(`${path}: layer ${i} has unknown activation '${layer.activation}'`);
    }
    if (!Array.isArray(layer.weights) || layer.weights.length !== layer.bias.length) {
      throw new Error(`${path}: layer ${i} weight/bias row count mismatch`);
    }
    for (const row of layer.weights) {
      if (row.length !== dim) {
        throw new Error(`${path}: layer ${i} expects input dim ${row.length}, got ${dim}`);
      }
    }
    dim = layer.bias.length;
  }
  if (dim !== 2) {
    throw new Error(`${path}: final layer must emit 2 posteriors, emits ${dim}`);
  }
  return artifact;
}

const ACTIVATIONS: Record<Activation, (x: number) => number> = {
  tanh: Math.tanh,
  relu: (x) => (x > 0 ? x : 0),
  sigmoid: (x) => 1 / (1 + Math.exp(-x)),
};

/** Run one feature row through the stack; returns [qa, qb] in [0, 1]. */
export function forward(artifact: ModelArtifact, row: Float64Array): [number, number] {
  let current: Float64Array = row;
  for (const layer of artifact.layers) {
    const act = ACTIVATIONS[layer.activation];
    const next = new Float64Array(layer.bias.length);
    for (let o = 0; o < layer.bias.length; o++) {
      let acc = layer.bias[o];
      const weights = layer.weights[o];
      for (let i = 0; i < current.length; i++) acc += weights[i] * current[i];
      next[o] = act(acc);
    }
    current = next;
  }
  // the artifact validator guarantees two outputs; clamp in case the last
  // activation was not a squashing one
  const qa = Math.min(1, Math.max(0, current[0]));
  const qb = Math.min(1, Math.max(0, current[1]));
  return [qa, qb];
}

/** Serves posteriors by running the network over gathered feature frames. */
export class ModelSource implements PosteriorSource {
  private readonly cache = new Map<string, Float64Array[]>();

  constructor(
    private readonly artifact: ModelArtifact,
    private readonly audioRoot: string,
    public readonly shiftMs: number,
    private readonly features: FeatureOptions = DEFAULT_FEATURES,
  ) {
    if (artifact.input_dim !== features.nMels) {
      throw new Error(
        `model expects ${artifact.input_dim} inputs but features provide ${features.nMels}`,
      );
    }
  }

  private gridFeatures(recordingId: string): Float64Array[] {
    const cached = this.cache.get(recordingId);
    if (cached) return cached;
    let audio;
    try {
      audio = readWav(join(this.audioRoot, `${recordingId}.wav`));
    } catch (exc) {
      throw new Error(`unknown recording '${recordingId}': ${(exc as Error).message}`);
    }
    const frames = subsampleToGrid(logMel(audio, this.features), this.features.hopMs, this.shiftMs);
    this.cache.set(recordingId, frames);
    return frames;
  }

  posteriors(recordingId: string, frames: number[], shiftMs: number): number[][] {
    if (shiftMs !== this.shiftMs) {
      throw new Error(`request shift ${shiftMs} ms does not match worker grid ${this.shiftMs} ms`);
    }
    const rows = gatherFrames(this.gridFeatures(recordingId), frames, this.artifact.input_dim);
    return rows.map((row) => forward(this.artifact, row));
  }
}
