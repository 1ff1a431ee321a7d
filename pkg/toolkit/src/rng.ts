/**
 * Deterministic splittable random streams: counter-based splitmix64.
 *
 * Matches the generator used by the campaign runner bit for bit, so a
 * training run is reproducible from (seed, label path) alone. All state
 * is one 64-bit integer held as a BigInt.
 */

const MASK = (1n << 64n) - 1n;
const GAMMA = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

// Shortest double that maps the top 53 bits onto [0, 1).
const U53 = 2 ** -53;

/** Finalize one 64-bit value (the splitmix64 output function). */
export function mix64(x: bigint): bigint {
  let z = (x + GAMMA) & MASK;
  z = ((z ^ (z >> 30n)) * MIX1) & MASK;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK;
  return z ^ (z >> 31n);
}

/** FNV-1a hash of UTF-8 text, for turning string ids into labels. */
export function fnv1a64(text: string): bigint {
  let h = 0xcbf29ce484222325n;
  for (const byte of new TextEncoder().encode(text)) {
    h = ((h ^ BigInt(byte)) * 0x100000001b3n) & MASK;
  }
  return h;
}

export class RandomStream {
  state: bigint;

  constructor(state: bigint) {
    this.state = state & MASK;
  }

  nextU64(): bigint {
    this.state = (this.state + GAMMA) & MASK;
    let z = ((this.state ^ (this.state >> 30n)) * MIX1) & MASK;
    z = ((z ^ (z >> 27n)) * MIX2) & MASK;
    return z ^ (z >> 31n);
  }

  raw(n: number): bigint[] {
    if (n < 0) throw new RangeError(`draw count must be >= 0, got ${n}`);
    const out = new Array<bigint>(n);
    for (let i = 0; i < n; i++) out[i] = this.nextU64();
    return out;
  }

  /** One float64 draw in [0, 1). */
  uniform(): number {
    return Number(this.nextU64() >> 11n) * U53;
  }

  /**
   * One binary32 Gaussian draw via Box-Muller, two raws per draw.
   * The transform runs in float64 and rounds once to binary32.
   */
  gauss32(mean = 0, std = 1): number {
    const r1 = this.nextU64();
    const r2 = this.nextU64();
    const u1 = (Number(r1 >> 11n) + 1) * U53; // (0, 1], log-safe
    const u2 = Number(r2 >> 11n) * U53;
    const z = Math.sqrt(-2 * Math.log(u1)) * Math.cos(2 * Math.PI * u2);
    return Math.fround(mean + std * z);
  }
}

/** Fold a label path into a base seed and return the resulting stream. */
export function deriveStream(baseSeed: bigint, labels: bigint[]): RandomStream {
  let s = mix64(baseSeed & MASK);
  for (const label of labels) {
    s = mix64(s ^ mix64(label & MASK));
  }
  return new RandomStream(s);
}

/** Indices that sort `keys` ascending; ties break toward the lower index. */
export function argsortKeys(keys: bigint[]): number[] {
  const idx = Array.from(keys, (_, i) => i);
  idx.sort((a, b) => (keys[a] < keys[b] ? -1 : keys[a] > keys[b] ? 1 : a - b));
  return idx;
}
