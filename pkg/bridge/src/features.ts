/**
 * Audio loading and log-mel feature extraction for model mode.
 *
 * The model consumes one feature vector per output frame.  Features are
 * computed on a fine hop (default 10 ms) and then subsampled to the wire
 * grid's frame shift, so a 100 ms grid sees every 10th feature frame.  Frame
 * selections arrive as arbitrary ascending index lists; `gatherFrames` picks
 * exactly those rows (feature-level gather — splicing audio before analysis
 * would smear energy across the cut points).  Indices beyond the end of the
 * audio yield zero vectors, mirroring how the posterior oracle treats frames
 * past the reference extent as silence.
 */

import { readFileSync } from "node:fs";

export interface WavAudio {
  sampleRate: number;
  samples: Float64Array; // mono, in [-1, 1)
}

/** Read a PCM WAV file (8/16/32-bit integer), mixing channels down to mono. */
export function readWav(path: string): WavAudio {
  const buf = readFileSync(path);
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${path}: not a RIFF/WAVE file`);
  }
  let offset = 12;
  let sampleRate = 0;
  let channels = 0;
  let bitsPerSample = 0;
  let data: Buffer | null = null;
  while (offset + 8 <= buf.length) {
    const chunkId = buf.toString("ascii", offset, offset + 4);
    const chunkSize = buf.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (chunkId === "fmt ") {
      const format = buf.readUInt16LE(body);
      if (format !== 1) {
        throw new Error(`${path}: only PCM (format 1) is supported, got format ${format}`);
      }
      channels = buf.readUInt16LE(body + 2);
      sampleRate = buf.readUInt32LE(body + 4);
      bitsPerSample = buf.readUInt16LE(body + 14);
    } else if (chunkId === "data") {
      data = buf.subarray(body, body + chunkSize);
    }
    offset = body + chunkSize + (chunkSize % 2); // chunks are word-aligned
  }
  if (!data || sampleRate === 0 || channels === 0) {
    throw new Error(`${path}: missing fmt or data chunk`);
  }
  const bytesPer = bitsPerSample / 8;
  const frameCount = Math.floor(data.length / (bytesPer * channels));
  const samples = new Float64Array(frameCount);
  for (let i = 0; i < frameCount; i++) {
    let acc = 0;
    for (let c = 0; c < channels; c++) {
      const at = (i * channels + c) * bytesPer;
      if (bitsPerSample === 16) acc += data.readInt16LE(at) / 32768;
      else if (bitsPerSample === 8) acc += (data.readUInt8(at) - 128) / 128;
      else if (bitsPerSample === 32) acc += data.readInt32LE(at) / 2147483648;
      else throw new Error(`${path}: unsupported bit depth ${bitsPerSample}`);
    }
    samples[i] = acc / channels;
  }
  return { sampleRate, samples };
}

/** In-place iterative radix-2 FFT (re/im pairs); length must be a power of 2. */
export function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  if ((n & (n - 1)) !== 0) throw new Error(`FFT size ${n} is not a power of 2`);
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const angle = (-2 * Math.PI) / len;
    const wRe = Math.cos(angle);
    const wIm = Math.sin(angle);
    for (let start = 0; start < n; start += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const evenRe = re[start + k];
        const evenIm = im[start + k];
        const oddRe = re[start + k + len / 2] * curRe - im[start + k + len / 2] * curIm;
        const oddIm = re[start + k + len / 2] * curIm + im[start + k + len / 2] * curRe;
        re[start + k] = evenRe + oddRe;
        im[start + k] = evenIm + oddIm;
        re[start + k + len / 2] = evenRe - oddRe;
        im[start + k + len / 2] = evenIm - oddIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

const hz2mel = (hz: number): number => 2595 * Math.log10(1 + hz / 700);
const mel2hz = (mel: number): number => 700 * (10 ** (mel / 2595) - 1);

/** Triangular mel filterbank over FFT bins 0..nFft/2. */
export function melFilterbank(
  nFft: number,
  nMels: number,
  sampleRate: number,
): Float64Array[] {
  const nBins = nFft / 2 + 1;
  const melLo = hz2mel(0);
  const melHi = hz2mel(sampleRate / 2);
  const centers: number[] = [];
  for (let m = 0; m < nMels + 2; m++) {
    const hz = mel2hz(melLo + ((melHi - melLo) * m) / (nMels + 1));
    centers.push((hz * nFft) / sampleRate);
  }
  const bank: Float64Array[] = [];
  for (let m = 1; m <= nMels; m++) {
    const filt = new Float64Array(nBins);
    const [lo, mid, hi] = [centers[m - 1], centers[m], centers[m + 1]];
    for (let bin = 0; bin < nBins; bin++) {
      if (bin > lo && bin < mid) filt[bin] = (bin - lo) / (mid - lo);
      else if (bin >= mid && bin < hi) filt[bin] = (hi - bin) / (hi - mid);
    }
    bank.push(filt);
  }
  return bank;
}

export interface FeatureOptions {
  windowMs: number;
  hopMs: number;
  nMels: number;
  nFft: number;
}

export const DEFAULT_FEATURES: FeatureOptions = {
  windowMs: 25,
  hopMs: 10,
  nMels: 23,
  nFft: 512,
};

/** Log-mel energies, one Float64Array(nMels) per hop. */
export function logMel(audio: WavAudio, opts: FeatureOptions = DEFAULT_FEATURES): Float64Array[] {
  const { sampleRate, samples } = audio;
  const hop = Math.round((sampleRate * opts.hopMs) / 1000);
  const window = Math.round((sampleRate * opts.windowMs) / 1000);
  if (window > opts.nFft) {
    throw new Error(`window ${window} samples exceeds FFT size ${opts.nFft}`);
  }
  const hann = new Float64Array(window);
  for (let i = 0; i < window; i++) {
    hann[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (window - 1));
  }
  const bank = melFilterbank(opts.nFft, opts.nMels, sampleRate);
  const nFrames = Math.max(0, Math.ceil(samples.length / hop));
  const frames: Float64Array[] = [];
  const re = new Float64Array(opts.nFft);
  const im = new Float64Array(opts.nFft);
  for (let f = 0; f < nFrames; f++) {
    re.fill(0);
    im.fill(0);
    const start = f * hop;
    for (let i = 0; i < window && start + i < samples.length; i++) {
      re[i] = samples[start + i] * hann[i];
    }
    fft(re, im);
    const nBins = opts.nFft / 2 + 1;
    const power = new Float64Array(nBins);
    for (let bin = 0; bin < nBins; bin++) {
      power[bin] = re[bin] * re[bin] + im[bin] * im[bin];
    }
    const mels = new Float64Array(opts.nMels);
    for (let m = 0; m < opts.nMels; m++) {
      let acc = 0;
      const filt = bank[m];
      for (let bin = 0; bin < nBins; bin++) acc += filt[bin] * power[bin];
      mels[m] = Math.log(acc + 1e-10);
    }
    frames.push(mels);
  }
  return frames;
}

/**
 * Subsample fine-hop features to the wire grid: output frame t is the feature
 * frame at t * (shiftMs / hopMs).  The shift must be a multiple of the hop.
 */
export function subsampleToGrid(
  features: Float64Array[],
  hopMs: number,
  shiftMs: number,
): Float64Array[] {
  if (shiftMs % hopMs !== 0) {
    throw new Error(`grid shift ${shiftMs} ms is not a multiple of the feature hop ${hopMs} ms`);
  }
  const factor = shiftMs / hopMs;
  const out: Float64Array[] = [];
  for (let t = 0; t * factor < features.length; t++) {
    out.push(features[t * factor]);
  }
  return out;
}

/**
 * Pick the requested rows in request order; rows past the end are zeros.
 * The gather is per-frame, so the result is independent of whether the
 * selection is contiguous.
 */
export function gatherFrames(
  features: Float64Array[],
  indices: number[],
  dim: number,
): Float64Array[] {
  return indices.map((index) =>
    index < features.length ? features[index] : new Float64Array(dim),
  );
}
