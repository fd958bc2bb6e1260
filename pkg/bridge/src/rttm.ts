/**
 * RTTM parsing and rasterization onto a uniform frame grid.
 *
 * Mirrors the host's conventions exactly: 10-field SPEAKER lines, `;`
 * comments, integer-millisecond arithmetic with round-half-to-even, and the
 * frame-center activity rule (a frame is active iff its center lies inside
 * `[onset, onset + duration)`).  The echo-oracle mode depends on this being
 * frame-identical to the host's own rasterization of the same file.
 */

export interface RttmRecord {
  recordingId: string;
  channel: number;
  onset: number;
  duration: number;
  speakerId: string;
}

export class RttmParseError extends Error {
  constructor(
    public readonly lineNumber: number,
    public readonly line: string,
    public readonly reason: string,
  ) {
    super(`line ${lineNumber}: ${reason}: ${JSON.stringify(line)}`);
    this.name = "RttmParseError";
  }
}

/** Round seconds to integer milliseconds, ties to even (IEEE default). */
export function secondsToMs(seconds: number): number {
  const r = seconds * 1000.0;
  const floor = Math.floor(r);
  const frac = r - floor;
  if (frac > 0.5) return floor + 1;
  if (frac < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

function parseTime(field: string, lineNumber: number, raw: string): number {
  const value = Number(field);
  const nanSpelling = /^[+-]?nan$/i.test(field);
  if (field === "" || (Number.isNaN(value) && !nanSpelling)) {
    throw new RttmParseError(lineNumber, raw, "bad onset/duration");
  }
  if (!Number.isFinite(value)) {
    throw new RttmParseError(lineNumber, raw, "non-finite onset/duration");
  }
  return value;
}

/** Parse RTTM text into records grouped by recording id, order preserved. */
export function parseRttm(text: string): Map<string, RttmRecord[]> {
  const byRecording = new Map<string, RttmRecord[]>();
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const raw = lines[i];
    const line = raw.trim();
    if (!line || line.startsWith(";")) continue;
    const lineNumber = i + 1;
    const fields = line.split(/\s+/);
    if (fields.length !== 10) {
      throw new RttmParseError(lineNumber, raw, `expected 10 fields, got ${fields.length}`);
    }
    if (fields[0] !== "SPEAKER") {
      throw new RttmParseError(lineNumber, raw, `unsupported record type '${fields[0]}'`);
    }
    const channel = Number(fields[2]);
    if (!Number.isInteger(channel) || fields[2] === "") {
      throw new RttmParseError(lineNumber, raw, `bad channel '${fields[2]}'`);
    }
    const onset = parseTime(fields[3], lineNumber, raw);
    const duration = parseTime(fields[4], lineNumber, raw);
    if (onset < 0) {
      throw new RttmParseError(lineNumber, raw, `negative onset ${onset}`);
    }
    if (duration <= 0) {
      throw new RttmParseError(lineNumber, raw, `non-positive duration ${duration}`);
    }
    const record: RttmRecord = {
      recordingId: fields[1],
      channel,
      onset,
      duration,
      speakerId: fields[7],
    };
    const group = byRecording.get(record.recordingId);
    if (group) group.push(record);
    else byRecording.set(record.recordingId, [record]);
  }
  return byRecording;
}

/** Frame count needed to cover every record: ceil(max offset / shift). */
export function recordsTotalFrames(records: RttmRecord[], frameShiftMs: number): number {
  let maxOffsetMs = 0;
  for (const record of records) {
    const offset = secondsToMs(record.onset) + secondsToMs(record.duration);
    if (offset > maxOffsetMs) maxOffsetMs = offset;
  }
  return Math.ceil(maxOffsetMs / frameShiftMs);
}

export interface SpeakerTrack {
  id: string;
  mask: Uint8Array; // 1 where active, length = totalFrames
}

export interface Reference {
  frameShiftMs: number;
  totalFrames: number;
  speakers: SpeakerTrack[];
}

/**
 * Rasterize one recording's records: first-appearance speaker order, one
 * boolean mask per speaker on the shared grid.
 */
export function rasterize(records: RttmRecord[], frameShiftMs: number): Reference {
  if (records.length === 0) {
    throw new Error("cannot rasterize an empty record list");
  }
  const totalFrames = recordsTotalFrames(records, frameShiftMs);
  const masks = new Map<string, Uint8Array>();
  for (const record of records) {
    let mask = masks.get(record.speakerId);
    if (!mask) {
      mask = new Uint8Array(totalFrames);
      masks.set(record.speakerId, mask);
    }
    const onsetMs = secondsToMs(record.onset);
    const offsetMs = onsetMs + secondsToMs(record.duration);
    // frame centers live at (2t+1)*shift in double-millisecond units
    const first = Math.max(0, Math.ceil((2 * onsetMs - frameShiftMs) / (2 * frameShiftMs)));
    const lastExcl = Math.min(
      totalFrames,
      Math.floor((2 * offsetMs - frameShiftMs - 1) / (2 * frameShiftMs)) + 1,
    );
    for (let t = first; t < lastExcl; t++) mask[t] = 1;
  }
  const speakers: SpeakerTrack[] = [];
  for (const [id, mask] of masks) speakers.push({ id, mask });
  return { frameShiftMs, totalFrames, speakers };
}
