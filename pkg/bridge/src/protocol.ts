/**
 * The newline-delimited JSON wire protocol, worker side.
 *
 * Lifecycle: emit one `{"hello": {"shift_ms": N}}` line at startup, then
 * answer every request line with exactly one response line carrying the same
 * id — `{"id": N, "posteriors": [[qa, qb], ...]}` on success or
 * `{"id": N, "error": "..."}` on failure.  A line that cannot even be
 * attributed to a request id is answered with id -1.  The loop is
 * single-threaded (one request in flight by protocol) and only terminates on
 * end of input.
 */

import readline from "node:readline";
import type { Readable, Writable } from "node:stream";

/** Anything that can turn (recording, frames) into two-speaker posteriors. */
export interface PosteriorSource {
  shiftMs: number;
  posteriors(recordingId: string, frames: number[], shiftMs: number): number[][];
}

export class RequestError extends Error {}

/** Decode ascending, non-overlapping [start, length] spans to frame indices. */
export function spansToFrames(spans: unknown): number[] {
  if (!Array.isArray(spans)) {
    throw new RequestError("frames must be an array of [start, length] spans");
  }
  const frames: number[] = [];
  let prevEnd = -1;
  for (const span of spans) {
    if (!Array.isArray(span) || span.length !== 2) {
      throw new RequestError(`span must be a [start, length] pair, got ${JSON.stringify(span)}`);
    }
    const [start, length] = span;
    if (!Number.isInteger(start) || !Number.isInteger(length) || start < 0 || length <= 0) {
      throw new RequestError(`invalid span (${start}, ${length})`);
    }
    if (start <= prevEnd) {
      throw new RequestError("spans must be ascending and non-overlapping");
    }
    for (let f = start; f < start + length; f++) frames.push(f);
    prevEnd = start + length - 1;
  }
  return frames;
}

function emit(output: Writable, payload: Record<string, unknown>): void {
  output.write(JSON.stringify(payload) + "\n");
}

function handleLine(source: PosteriorSource, line: string, output: Writable): void {
  let message: unknown;
  try {
    message = JSON.parse(line);
  } catch (exc) {
    emit(output, { error: `bad request line: ${(exc as Error).message}`, id: -1 });
    return;
  }
  if (typeof message !== "object" || message === null || Array.isArray(message)) {
    emit(output, { error: "bad request line: request must be a JSON object", id: -1 });
    return;
  }
  const request = message as Record<string, unknown>;
  const id = request.id;
  if (typeof id !== "number" || !Number.isInteger(id)) {
    emit(output, { error: "request id missing or not an integer", id: -1 });
    return;
  }

  let recording: string;
  let frames: number[];
  let shiftMs: number;
  try {
    if (typeof request.recording !== "string") {
      throw new RequestError("recording must be a string");
    }
    recording = request.recording;
    frames = spansToFrames(request.frames);
    if (typeof request.shift_ms !== "number" || !Number.isInteger(request.shift_ms)) {
      throw new RequestError("shift_ms must be an integer");
    }
    shiftMs = request.shift_ms;
  } catch (exc) {
    emit(output, { error: `invalid request: ${(exc as Error).message}`, id });
    return;
  }
  if (frames.length === 0) {
    emit(output, { error: "empty frame selection", id });
    return;
  }
  try {
    const posteriors = source.posteriors(recording, frames, shiftMs);
    emit(output, { id, posteriors });
  } catch (exc) {
    emit(output, { error: (exc as Error).message, id });
  }
}

/** Run the request loop until the input stream ends. */
export async function serve(
  source: PosteriorSource,
  input: Readable,
  output: Writable,
): Promise<void> {
  emit(output, { hello: { shift_ms: source.shiftMs } });
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  for await (const raw of rl) {
    const line = String(raw).trim();
    if (!line) continue;
    handleLine(source, line, output);
  }
}
