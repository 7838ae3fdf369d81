/**
 * Deterministic toy fixtures: a randomly initialized 2-stage model and three
 * 8x8x8 labeled cases. Used by the integration tests on both sides of the
 * interchange format.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import type { ModelSpec } from "./model.js";
import { Splitmix64, deriveSeed } from "./seeding.js";

export const FIXTURE_DIMS: [number, number, number] = [8, 8, 8];

function uniformWeights(
  rng: Splitmix64,
  count: number,
  fanIn: number,
): number[] {
  const bound = Math.sqrt(3 / fanIn);
  const out = new Array<number>(count);
  for (let i = 0; i < count; i++) {
    out[i] = (2 * rng.nextFloat() - 1) * bound;
  }
  return out;
}

export function makeModelSpec(seed: bigint): ModelSpec {
  const c1 = 6;
  const c2 = 8;
  const classes = 3;
  const w = (name: string, count: number, fanIn: number) =>
    uniformWeights(new Splitmix64(deriveSeed(seed, "weights", name)), count, fanIn);
  return {
    arch: "tiny-segnet3d",
    inChannels: 1,
    stages: [
      { name: "stage1", channels: c1, stride: 1 },
      { name: "stage2", channels: c2, stride: 2 },
    ],
    head: { name: "seg_head", classes },
    weights: {
      "stage1.kernel": w("stage1.kernel", c1 * 1 * 27, 27),
      "stage1.bias": w("stage1.bias", c1, c1),
      "stage2.kernel": w("stage2.kernel", c2 * c1 * 27, c1 * 27),
      "stage2.bias": w("stage2.bias", c2, c2),
      "seg_head.kernel": w("seg_head.kernel", classes * c1, c1),
      "seg_head.bias": w("seg_head.bias", classes, classes),
    },
  };
}

export interface CaseJson {
  caseId: string;
  dims: [number, number, number];
  image: number[];
  labels: number[];
}

/**
 * Slab labels: class 1 fills low-x, class 2 fills high-x, background between.
 * Boundaries shift per case so class volumes differ; the image carries a
 * per-class intensity bump plus noise so features correlate with labels.
 */
export function makeCaseJson(index: number, seed: bigint): CaseJson {
  const [X, Y, Z] = FIXTURE_DIMS;
  const lowEdge = 3 - (index % 2);
  const highEdge = 5 + (index === 2 ? 1 : 0);
  const rng = new Splitmix64(deriveSeed(seed, "case", index));
  const image: number[] = [];
  const labels: number[] = [];
  for (let x = 0; x < X; x++) {
    const label = x < lowEdge ? 1 : x >= highEdge ? 2 : 0;
    for (let y = 0; y < Y; y++) {
      for (let z = 0; z < Z; z++) {
        labels.push(label);
        image.push(0.5 * label + rng.nextFloat());
      }
    }
  }
  return { caseId: `case${index}`, dims: [X, Y, Z], image, labels };
}

export interface FixtureManifest {
  model: string;
  cases: string[];
}

export function makeFixtures(outDir: string, seed: bigint, cases = 3): FixtureManifest {
  mkdirSync(outDir, { recursive: true });
  const modelPath = join(outDir, "model.json");
  writeFileSync(modelPath, JSON.stringify(makeModelSpec(seed)));
  const casePaths: string[] = [];
  for (let i = 0; i < cases; i++) {
    const path = join(outDir, `case${i}.json`);
    writeFileSync(path, JSON.stringify(makeCaseJson(i, seed)));
    casePaths.push(path);
  }
  return { model: modelPath, cases: casePaths };
}
