import { describe, expect, it } from "vitest";

import {
  DEFAULT_SAMPLING,
  apportion,
  classSampleSize,
  scaleSampleBudget,
  validateSamplingConfig,
} from "../src/sampling.js";

describe("classSampleSize", () => {
  it("applies the proportional rule with floor and cap", () => {
    const cfg = { ...DEFAULT_SAMPLING, rate: 0.1 };
    expect(classSampleSize(1000, cfg)).toBe(100);
    expect(classSampleSize(5, cfg)).toBeNull();
    expect(classSampleSize(100000, cfg)).toBe(500);
    expect(classSampleSize(9, cfg)).toBeNull();
    expect(classSampleSize(10, cfg)).toBe(10);
  });

  it("rounds half up", () => {
    const cfg = { ...DEFAULT_SAMPLING, perClassMin: 2 };
    expect(classSampleSize(250, cfg)).toBe(13); // 12.5 -> 13
    expect(classSampleSize(249, cfg)).toBe(12); // 12.45 -> 12
    expect(classSampleSize(30, cfg)).toBe(2); // 1.5 -> 2
  });

  it("never exceeds the voxel count", () => {
    const cfg = { ...DEFAULT_SAMPLING, perClassMin: 10, rate: 0.05 };
    for (const v of [10, 11, 13, 50, 520, 10007]) {
      const n = classSampleSize(v, cfg);
      expect(n).not.toBeNull();
      expect(n!).toBeLessThanOrEqual(v);
      expect(n!).toBeLessThanOrEqual(cfg.perClassMax);
      expect(n!).toBeGreaterThanOrEqual(cfg.perClassMin);
    }
  });
});

describe("scaleSampleBudget", () => {
  it("halves per scale step down to the floor", () => {
    expect([1, 2, 3, 4, 5, 6].map((s) => scaleSampleBudget(s, DEFAULT_SAMPLING))).toEqual(
      [300, 150, 75, 37, 32, 32],
    );
  });

  it("rejects scale 0", () => {
    expect(() => scaleSampleBudget(0, DEFAULT_SAMPLING)).toThrow(/>= 1/);
  });
});

describe("apportion", () => {
  it("splits proportionally with largest-remainder rounding", () => {
    expect(apportion(5, [3, 3, 4])).toEqual([2, 1, 2]);
    expect(apportion(10, [5, 5])).toEqual([5, 5]);
    expect(apportion(0, [4, 4])).toEqual([0, 0]);
  });

  it("caps at pool sizes", () => {
    expect(apportion(5, [1, 9])).toEqual([1, 4]);
    expect(apportion(3, [0, 3])).toEqual([0, 3]);
  });

  it("always sums to the requested total", () => {
    const shares = [7, 1, 3, 9, 2];
    for (let total = 0; total <= 22; total++) {
      const got = apportion(total, shares);
      expect(got.reduce((a, b) => a + b, 0)).toBe(total);
      got.forEach((g, i) => {
        expect(g).toBeLessThanOrEqual(shares[i]);
        expect(g).toBeGreaterThanOrEqual(0);
      });
    }
  });

  it("rejects totals beyond the pool", () => {
    expect(() => apportion(7, [2, 2])).toThrow(/available/);
  });
});

describe("validateSamplingConfig", () => {
  it("accepts the defaults", () => {
    expect(() => validateSamplingConfig(DEFAULT_SAMPLING)).not.toThrow();
  });

  it("rejects inverted bounds and bad rates", () => {
    expect(() =>
      validateSamplingConfig({ ...DEFAULT_SAMPLING, rate: 0 }),
    ).toThrow(/rate/);
    expect(() =>
      validateSamplingConfig({ ...DEFAULT_SAMPLING, rate: 1.5 }),
    ).toThrow(/rate/);
    expect(() =>
      validateSamplingConfig({ ...DEFAULT_SAMPLING, perClassMin: 600 }),
    ).toThrow(/perClassMin/);
    expect(() =>
      validateSamplingConfig({ ...DEFAULT_SAMPLING, globalMin: 400 }),
    ).toThrow(/globalMin/);
  });
});
