/**
 * Budget rules shared with the Python scorer: proportional per-class sample
 * sizes with floor/cap clamping, per-scale global budgets that halve toward
 * the bottleneck, and largest-remainder apportionment across patches.
 */

export const GLOBAL_STREAM_CLASS = 0;

export interface SamplingConfig {
  rate: number;
  perClassMin: number;
  perClassMax: number;
  globalBase: number;
  globalMin: number;
  seed: bigint;
}

export const DEFAULT_SAMPLING: SamplingConfig = {
  rate: 0.05,
  perClassMin: 10,
  perClassMax: 500,
  globalBase: 300,
  globalMin: 32,
  seed: 42n,
};

export function validateSamplingConfig(cfg: SamplingConfig): void {
  if (!(cfg.rate > 0 && cfg.rate <= 1)) {
    throw new RangeError(`rate ${cfg.rate} outside (0, 1]`);
  }
  if (cfg.perClassMin > cfg.perClassMax) {
    throw new RangeError("perClassMin > perClassMax");
  }
  if (cfg.globalMin > cfg.globalBase) {
    throw new RangeError("globalMin > globalBase");
  }
}

/**
 * Rows to draw for a class with `voxelCount` foreground voxels, or null when
 * the class falls below the per-class floor. Rounding is half-up.
 */
export function classSampleSize(
  voxelCount: number,
  cfg: SamplingConfig,
): number | null {
  if (voxelCount < cfg.perClassMin) return null;
  const n = Math.floor(cfg.rate * voxelCount + 0.5);
  return Math.max(cfg.perClassMin, Math.min(cfg.perClassMax, voxelCount, n));
}

/** Global budget at a 1-based scale; halves per step, floored at globalMin. */
export function scaleSampleBudget(scaleIndex: number, cfg: SamplingConfig): number {
  if (scaleIndex < 1) {
    throw new RangeError(`scaleIndex ${scaleIndex} must be >= 1`);
  }
  return Math.max(cfg.globalMin, cfg.globalBase >> (scaleIndex - 1));
}

/**
 * Split `total` draws across pools of the given sizes, proportionally with
 * largest-remainder rounding (first index wins ties), never exceeding any
 * pool.
 */
export function apportion(total: number, shares: number[]): number[] {
  const pool = shares.reduce((a, b) => a + b, 0);
  if (total > pool) {
    throw new RangeError(`cannot draw ${total} from ${pool} available`);
  }
  const quotas = shares.map((s) => (pool ? (total * s) / pool : s));
  const counts = quotas.map((q, i) => Math.min(Math.floor(q), shares[i]));
  let assigned = counts.reduce((a, b) => a + b, 0);
  while (assigned < total) {
    let best = -1;
    let bestFrac = -Infinity;
    for (let i = 0; i < counts.length; i++) {
      if (counts[i] >= shares[i]) continue;
      const frac = quotas[i] - counts[i];
      if (frac > bestFrac) {
        bestFrac = frac;
        best = i;
      }
    }
    counts[best] += 1;
    assigned += 1;
  }
  return counts;
}
