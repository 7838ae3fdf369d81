/**
 * Deterministic sub-stream seeding, sharing the scheme of the Python
 * scorer: every randomized draw derives a 64-bit seed from the user seed
 * plus a context tuple (case id, scale index, class id, patch index), so
 * results are independent of evaluation order.
 */

export const MASK64 = 0xffffffffffffffffn;
export const GAMMA = 0x9e3779b97f4a7c15n;

export function splitmix64(x: bigint): bigint {
  x = (x + GAMMA) & MASK64;
  let z = x;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  return z ^ (z >> 31n);
}

export type SeedField = number | bigint | string;

/* Strings are length-prefixed so ("ab","c") and ("a","bc") cannot collide. */
function chunks(field: SeedField): bigint[] {
  if (typeof field === "string") {
    const raw = Buffer.from(field, "utf-8");
    const out: bigint[] = [BigInt(0x5354 ^ raw.length)];
    for (let i = 0; i < raw.length; i += 8) {
      const piece = raw.subarray(i, i + 8);
      let value = 0n;
      for (let j = piece.length - 1; j >= 0; j--) {
        value = (value << 8n) | BigInt(piece[j]);
      }
      out.push(value);
    }
    return out;
  }
  const v = typeof field === "bigint" ? field : BigInt(field);
  return [v & MASK64];
}

export function deriveSeed(base: bigint | number, ...fields: SeedField[]): bigint {
  let h = (typeof base === "bigint" ? base : BigInt(base)) & MASK64;
  for (const field of fields) {
    for (const chunk of chunks(field)) {
      h = splitmix64(h ^ chunk);
    }
  }
  return h;
}

/** Stateful generator: output k is splitmix64(seed + k * GAMMA). */
export class Splitmix64 {
  private state: bigint;

  constructor(seed: bigint) {
    this.state = seed & MASK64;
  }

  nextU64(): bigint {
    const out = splitmix64(this.state);
    this.state = (this.state + GAMMA) & MASK64;
    return out;
  }

  /** Uniform in [0, 1) with 53 usable bits. */
  nextFloat(): number {
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }

  /** Uniform integer in [0, bound). */
  nextBelow(bound: number): number {
    if (bound <= 0) throw new RangeError(`bound ${bound} must be positive`);
    return Math.floor(this.nextFloat() * bound);
  }
}

/**
 * k distinct positions in [0, poolSize), ascending. Partial Fisher-Yates,
 * then sort, mirroring the scorer's draw-then-sort convention.
 */
export function drawWithoutReplacement(
  rng: Splitmix64,
  poolSize: number,
  k: number,
): Uint32Array {
  if (k > poolSize) {
    throw new RangeError(`cannot draw ${k} from a pool of ${poolSize}`);
  }
  const arr = new Uint32Array(poolSize);
  for (let i = 0; i < poolSize; i++) arr[i] = i;
  for (let i = 0; i < k; i++) {
    const j = i + rng.nextBelow(poolSize - i);
    const tmp = arr[i];
    arr[i] = arr[j];
    arr[j] = tmp;
  }
  const picked = arr.slice(0, k);
  picked.sort();
  return picked;
}
