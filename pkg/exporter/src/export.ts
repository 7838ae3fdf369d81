/**
 * Turns a model plus labeled volumes into XFB1 bundles: sliding-window
 * patches, per-stage feature taps upsampled to output resolution, stratified
 * class sampling and global sampling with budgets apportioned across patches
 * so no full-resolution feature volume is ever stitched together.
 */

import { existsSync, mkdirSync, readFileSync, renameSync, writeFileSync } from "node:fs";
import { basename, join } from "node:path";

import type { Dims, UpsampleMode, VolumeData } from "./model.js";
import { ModelError, TinySegNet, upsample } from "./model.js";
import {
  GLOBAL_STREAM_CLASS,
  SamplingConfig,
  apportion,
  classSampleSize,
  scaleSampleBudget,
  validateSamplingConfig,
} from "./sampling.js";
import { Splitmix64, deriveSeed, drawWithoutReplacement } from "./seeding.js";
import type { CaseBundle, Matrix, ScaleSamples } from "./xfb1.js";
import { matrix, readCaseBundle, writeCaseBundle } from "./xfb1.js";
import type { CaseVolume } from "./volume.js";
import { extractImagePatch, extractLabelPatch, patchGrid } from "./volume.js";

export interface TapSpec {
  /** decoder stages to export, nearest-to-output first */
  stages: string[];
  /** source segmentation head for posterior capture, optional */
  head?: string;
  patch: Dims;
  stride: Dims;
  upsampleMode: UpsampleMode;
}

export class ExportError extends Error {}

function validateTap(tap: TapSpec, model: TinySegNet): void {
  if (tap.stages.length === 0) {
    throw new ExportError("tap must list at least one stage");
  }
  const known = model.stageNames;
  for (const name of tap.stages) {
    if (!known.includes(name)) {
      throw new ExportError(
        `unknown stage "${name}"; available stages: ${known.join(", ")}`,
      );
    }
  }
  if (tap.head !== undefined) {
    const headName = model.spec.head?.name;
    if (headName === undefined) {
      throw new ExportError(`model has no head; cannot tap "${tap.head}"`);
    }
    if (tap.head !== headName) {
      throw new ExportError(`unknown head "${tap.head}"; available head: ${headName}`);
    }
  }
  for (let a = 0; a < 3; a++) {
    if (tap.patch[a] < 1 || tap.stride[a] < 1 || tap.stride[a] > tap.patch[a]) {
      throw new ExportError(
        `axis ${a}: stride ${tap.stride[a]} outside 1..patch(${tap.patch[a]})`,
      );
    }
  }
}

function rowFrom(vol: VolumeData, voxel: number, vox: number): Float64Array {
  const row = new Float64Array(vol.channels);
  for (let c = 0; c < vol.channels; c++) {
    row[c] = vol.data[c * vox + voxel];
  }
  return row;
}

function stack(rows: Float64Array[], cols: number): Matrix {
  const m = matrix(rows.length, cols);
  rows.forEach((row, r) => m.data.set(row, r * cols));
  return m;
}

export function exportCase(
  model: TinySegNet,
  volume: CaseVolume,
  tap: TapSpec,
  cfg: SamplingConfig,
): Uint8Array {
  validateTap(tap, model);
  validateSamplingConfig(cfg);
  if (volume.dims.some((d, a) => tap.patch[a] > d)) {
    throw new ExportError(
      `patch ${tap.patch.join("x")} exceeds volume ${volume.dims.join("x")}`,
    );
  }
  const grid = patchGrid(volume.dims, tap.patch, tap.stride);
  const patchVox = tap.patch[0] * tap.patch[1] * tap.patch[2];

  // Pass 1 is labels only: budgets and their split across patches.
  const labelPatches = grid.map((g) => extractLabelPatch(volume, g.origin, tap.patch));
  let maxLabel = 0;
  const perPatchCounts = new Map<number, number[]>();
  labelPatches.forEach((labels, pi) => {
    for (const v of labels) {
      if (v > maxLabel) maxLabel = v;
      if (v < 1) continue;
      let counts = perPatchCounts.get(v);
      if (counts === undefined) {
        counts = new Array(grid.length).fill(0);
        perPatchCounts.set(v, counts);
      }
      counts[pi] += 1;
    }
  });
  const classIds = [...perPatchCounts.keys()].sort((a, b) => a - b);
  const classTakes = new Map<number, number[]>();
  for (const classId of classIds) {
    const counts = perPatchCounts.get(classId)!;
    const n = classSampleSize(
      counts.reduce((a, b) => a + b, 0),
      cfg,
    );
    if (n !== null) classTakes.set(classId, apportion(n, counts));
  }
  const totalVoxels = grid.length * patchVox;
  const patchShares = new Array(grid.length).fill(patchVox);
  const globalTakes = tap.stages.map((_, idx) =>
    apportion(Math.min(scaleSampleBudget(idx + 1, cfg), totalVoxels), patchShares),
  );

  const classRows = tap.stages.map(() => new Map<number, Float64Array[]>());
  const postRows: Float64Array[][] = tap.stages.map(() => []);
  const globalRows: Float64Array[][] = tap.stages.map(() => []);
  const channels: number[] = new Array(tap.stages.length).fill(0);

  // Pass 2 holds one patch in memory at a time.
  grid.forEach((g, pi) => {
    const image = extractImagePatch(volume, g.origin, tap.patch);
    const labels = labelPatches[pi];
    const result = model.forward(image, tap.patch);
    const softmaxUp =
      tap.head !== undefined && result.softmax !== null
        ? upsample(result.softmax, tap.patch, tap.upsampleMode)
        : null;
    tap.stages.forEach((stageName, idx) => {
      const scaleIndex = idx + 1;
      const stage = upsample(result.stages.get(stageName)!, tap.patch, tap.upsampleMode);
      channels[idx] = stage.channels;
      for (const [classId, takes] of classTakes) {
        const take = takes[pi];
        if (take === 0) continue;
        const pool: number[] = [];
        for (let v = 0; v < patchVox; v++) {
          if (labels[v] === classId) pool.push(v);
        }
        const rng = new Splitmix64(
          deriveSeed(cfg.seed, volume.caseId, scaleIndex, classId, pi),
        );
        const positions = drawWithoutReplacement(rng, pool.length, take);
        let rows = classRows[idx].get(classId);
        if (rows === undefined) {
          rows = [];
          classRows[idx].set(classId, rows);
        }
        for (const p of positions) {
          const voxel = pool[p];
          rows.push(rowFrom(stage, voxel, patchVox));
          if (softmaxUp !== null) {
            postRows[idx].push(rowFrom(softmaxUp, voxel, patchVox));
          }
        }
      }
      const take = globalTakes[idx][pi];
      if (take > 0) {
        const rng = new Splitmix64(
          deriveSeed(cfg.seed, volume.caseId, scaleIndex, GLOBAL_STREAM_CLASS, pi),
        );
        for (const voxel of drawWithoutReplacement(rng, patchVox, take)) {
          globalRows[idx].push(rowFrom(stage, voxel, patchVox));
        }
      }
    });
  });

  const scales: ScaleSamples[] = tap.stages.map((_, idx) => {
    const classSamples = new Map<number, Matrix>();
    for (const [classId, rows] of [...classRows[idx].entries()].sort(
      (a, b) => a[0] - b[0],
    )) {
      classSamples.set(classId, stack(rows, channels[idx]));
    }
    const sourceClasses = model.spec.head?.classes ?? 0;
    return {
      channels: channels[idx],
      classSamples,
      globalSamples: stack(globalRows[idx], channels[idx]),
      sourcePosteriors:
        tap.head !== undefined ? stack(postRows[idx], sourceClasses) : null,
    };
  });
  const bundle: CaseBundle = {
    caseId: volume.caseId,
    numClasses: Math.max(2, maxLabel + 1),
    scales,
  };
  return writeCaseBundle(bundle);
}

export interface ShardSpec {
  index: number;
  count: number;
}

export interface DatasetResult {
  exported: string[];
  skipped: string[];
  failed: { casePath: string; error: string }[];
}

function bundleOnDiskIsValid(path: string): boolean {
  try {
    readCaseBundle(readFileSync(path));
    return true;
  } catch {
    return false;
  }
}

export function exportDataset(
  model: TinySegNet,
  casePaths: string[],
  tap: TapSpec,
  cfg: SamplingConfig,
  outDir: string,
  loadCase: (path: string) => CaseVolume,
  shard?: ShardSpec,
  log: (line: string) => void = () => {},
): DatasetResult {
  if (shard !== undefined) {
    if (shard.count < 1 || shard.index < 0 || shard.index >= shard.count) {
      throw new ExportError(
        `shard ${shard.index}/${shard.count} is not a valid index/count pair`,
      );
    }
  }
  mkdirSync(outDir, { recursive: true });
  const result: DatasetResult = { exported: [], skipped: [], failed: [] };
  casePaths.forEach((casePath, index) => {
    if (shard !== undefined && index % shard.count !== shard.index) return;
    try {
      const volume = loadCase(casePath);
      const target = join(outDir, `${volume.caseId}.xfb`);
      if (existsSync(target) && bundleOnDiskIsValid(target)) {
        result.skipped.push(volume.caseId);
        log(`${volume.caseId}: skipped (valid bundle exists)`);
        return;
      }
      const bytes = exportCase(model, volume, tap, cfg);
      const tmp = `${target}.tmp-${process.pid}`;
      writeFileSync(tmp, bytes);
      renameSync(tmp, target);
      result.exported.push(volume.caseId);
      log(`${volume.caseId}: exported (${bytes.length} bytes)`);
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      result.failed.push({ casePath, error: message });
      log(`${basename(casePath)}: FAILED: ${message}`);
    }
  });
  return result;
}

export function loadModel(path: string): TinySegNet {
  let obj: unknown;
  try {
    obj = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new ModelError(`${path}: ${(err as Error).message}`);
  }
  return TinySegNet.fromSpec(obj as never);
}
