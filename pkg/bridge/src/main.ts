#!/usr/bin/env node
/**
 * Stdio posterior worker.
 *
 * Modes:
 *   echo_oracle — posteriors derived from a reference RTTM with seeded noise,
 *                 bit-identical to the host's in-process oracle (CI mode);
 *   model       — log-mel features + a small per-frame network loaded from a
 *                 JSON artifact, audio read from `<audio-root>/<recording>.wav`.
 *
 * Either way the worker announces its frame grid with a hello line and then
 * answers one JSON request per line until stdin closes.
 */

import { parseArgs } from "node:util";
import { readFileSync } from "node:fs";

import { oraclePosteriors, validateNoise, ChannelPolicy, NoiseSpec } from "./oracle.js";
import { parseRttm, rasterize, Reference } from "./rttm.js";
import { PosteriorSource, serve } from "./protocol.js";
import { loadArtifact, ModelSource } from "./model.js";

class EchoOracleSource implements PosteriorSource {
  constructor(
    private readonly references: Map<string, Reference>,
    public readonly shiftMs: number,
    private readonly noise: NoiseSpec,
    private readonly seed: number,
    private readonly policy: ChannelPolicy,
  ) {}

  posteriors(recordingId: string, frames: number[], shiftMs: number): number[][] {
    const reference = this.references.get(recordingId);
    if (!reference) {
      throw new Error(`unknown recording '${recordingId}'`);
    }
    return oraclePosteriors(reference, recordingId, frames, shiftMs, this.noise, this.seed, this.policy);
  }
}

function buildSource(): PosteriorSource {
  const { values } = parseArgs({
    options: {
      mode: { type: "string", default: "echo_oracle" },
      reference: { type: "string" },
      "frame-shift-ms": { type: "string", default: "100" },
      seed: { type: "string", default: "0" },
      epsilon: { type: "string", default: "0.01" },
      "flip-prob": { type: "string", default: "0" },
      jitter: { type: "string", default: "0" },
      "channel-policy": { type: "string", default: "hash" },
      model: { type: "string" },
      "audio-root": { type: "string" },
    },
  });
  const shiftMs = Number(values["frame-shift-ms"]);
  if (!Number.isInteger(shiftMs) || shiftMs <= 0) {
    throw new Error(`--frame-shift-ms must be a positive integer, got ${values["frame-shift-ms"]}`);
  }

  if (values.mode === "echo_oracle") {
    if (!values.reference) {
      throw new Error("--mode echo_oracle requires --reference <rttm>");
    }
    const policy = values["channel-policy"] as ChannelPolicy;
    if (!["hash", "identity", "swap"].includes(policy)) {
      throw new Error(`--channel-policy must be hash|identity|swap, got '${policy}'`);
    }
    const noise = validateNoise({
      epsilon: Number(values.epsilon),
      flipProb: Number(values["flip-prob"]),
      jitter: Number(values.jitter),
    });
    const text = readFileSync(values.reference, "utf-8");
    const references = new Map<string, Reference>();
    for (const [recording, records] of parseRttm(text)) {
      references.set(recording, rasterize(records, shiftMs));
    }
    return new EchoOracleSource(references, shiftMs, noise, Number(values.seed), policy);
  }

  if (values.mode === "model") {
    if (!values.model || !values["audio-root"]) {
      throw new Error("--mode model requires --model <artifact.json> and --audio-root <dir>");
    }
    return new ModelSource(loadArtifact(values.model), values["audio-root"], shiftMs);
  }

  throw new Error(`unknown mode '${values.mode}'`);
}

async function main(): Promise<void> {
  let source: PosteriorSource;
  try {
    source = buildSource();
  } catch (exc) {
    process.stderr.write(`${(exc as Error).message}\n`);
    process.exit(1);
  }
  await serve(source, process.stdin, process.stdout);
}

main().then(
  () => process.exit(0),
  (exc) => {
    process.stderr.write(`fatal: ${(exc as Error).message}\n`);
    process.exit(1);
  },
);
