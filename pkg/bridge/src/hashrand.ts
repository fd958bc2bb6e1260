/**
 * Deterministic, order-independent randomness derived from string keys.
 *
 * Every draw is a pure function of its key, so identical keys give identical
 * draws in any process and in any language — which is what lets this worker
 * reproduce the host's in-process oracle bit for bit.  The construction is
 * fixed: FNV-1a 64 over the key's UTF-8 bytes, the splitmix64 finalizer as a
 * mixer, and `(h >> 11) * 2^-53` to turn 64 bits into a double in [0, 1).
 */

const MASK64 = (1n << 64n) - 1n;
const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const GOLDEN = 0x9e3779b97f4a7c15n;
const SILVER = 0xc2b2ae3d27d4eb4fn;

const utf8 = new TextEncoder();

/** 64-bit FNV-1a hash of the key's UTF-8 bytes. */
export function fnv1a64(key: string): bigint {
  let h = FNV_OFFSET;
  for (const byte of utf8.encode(key)) {
    h = ((h ^ BigInt(byte)) * FNV_PRIME) & MASK64;
  }
  return h;
}

/** splitmix64 finalizer; a strong 64-bit bijective mixer. */
export function mix64(z: bigint): bigint {
  z &= MASK64;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  return (z ^ (z >> 31n)) & MASK64;
}

export function keyHash(key: string): bigint {
  return mix64(fnv1a64(key));
}

/** Uniform draw in [0, 1) determined entirely by the key. */
export function keyUniform(key: string): number {
  return Number(keyHash(key) >> 11n) * 2 ** -53;
}

/** Fair coin determined entirely by the key. */
export function keyBit(key: string): boolean {
  return (keyHash(key) & 1n) === 1n;
}

/**
 * Per-frame uniform in [0, 1).  `prefixHash` is `fnv1a64` of a string that
 * scopes the stream (seed, recording, draw kind); `channel` separates the two
 * posterior channels.  All arithmetic is modulo 2^64.
 */
export function frameUniform(prefixHash: bigint, frame: number, channel: number): number {
  const z =
    prefixHash ^
    ((BigInt(frame) * GOLDEN) & MASK64) ^
    ((BigInt(channel) * SILVER) & MASK64);
  return Number(mix64(z) >> 11n) * 2 ** -53;
}
