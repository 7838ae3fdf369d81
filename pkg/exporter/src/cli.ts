#!/usr/bin/env node
/**
 * Command line for the exporter.
 *
 *   cli.js export --model m.json --cases a.json,b.json --stages stage1,stage2
 *                 [--head seg_head] --patch 8,8,8 --stride 8,8,8 --out DIR
 *                 [--upsample nearest|trilinear] [--rate R] [--per-class-min N]
 *                 [--per-class-max N] [--global-base N] [--global-min N]
 *                 [--seed N] [--shard-index I --shard-count N]
 *   cli.js make-fixtures --out DIR [--seed N] [--cases N]
 *
 * Exit codes: 0 success, 1 one or more cases failed, 2 usage error.
 */

import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import type { TapSpec } from "./export.js";
import { exportDataset, loadModel } from "./export.js";
import { makeFixtures } from "./fixtures.js";
import type { Dims, UpsampleMode } from "./model.js";
import { DEFAULT_SAMPLING, SamplingConfig } from "./sampling.js";
import { loadCaseVolume } from "./volume.js";

class UsageError extends Error {}

function parseTriple(raw: string, what: string): Dims {
  const parts = raw.split(",").map((p) => Number(p));
  if (parts.length !== 3 || parts.some((v) => !Number.isInteger(v) || v < 1)) {
    throw new UsageError(`${what} must be three positive integers, got "${raw}"`);
  }
  return parts as Dims;
}

function parseCount(raw: string | undefined, what: string, fallback: number): number {
  if (raw === undefined) return fallback;
  const v = Number(raw);
  if (!Number.isInteger(v) || v < 0) {
    throw new UsageError(`${what} must be a non-negative integer, got "${raw}"`);
  }
  return v;
}

function require(value: string | undefined, flag: string): string {
  if (value === undefined) {
    throw new UsageError(`missing required flag ${flag}`);
  }
  return value;
}

function samplingFromFlags(v: Record<string, string | undefined>): SamplingConfig {
  const cfg = { ...DEFAULT_SAMPLING };
  if (v.rate !== undefined) {
    const rate = Number(v.rate);
    if (!Number.isFinite(rate)) throw new UsageError(`bad --rate "${v.rate}"`);
    cfg.rate = rate;
  }
  cfg.perClassMin = parseCount(v["per-class-min"], "--per-class-min", cfg.perClassMin);
  cfg.perClassMax = parseCount(v["per-class-max"], "--per-class-max", cfg.perClassMax);
  cfg.globalBase = parseCount(v["global-base"], "--global-base", cfg.globalBase);
  cfg.globalMin = parseCount(v["global-min"], "--global-min", cfg.globalMin);
  if (v.seed !== undefined) {
    try {
      cfg.seed = BigInt(v.seed);
    } catch {
      throw new UsageError(`bad --seed "${v.seed}"`);
    }
  }
  return cfg;
}

function cmdExport(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      model: { type: "string" },
      cases: { type: "string" },
      stages: { type: "string" },
      head: { type: "string" },
      patch: { type: "string" },
      stride: { type: "string" },
      out: { type: "string" },
      upsample: { type: "string" },
      rate: { type: "string" },
      "per-class-min": { type: "string" },
      "per-class-max": { type: "string" },
      "global-base": { type: "string" },
      "global-min": { type: "string" },
      seed: { type: "string" },
      "shard-index": { type: "string" },
      "shard-count": { type: "string" },
    },
  });
  const upsampleMode = (values.upsample ?? "nearest") as UpsampleMode;
  if (upsampleMode !== "nearest" && upsampleMode !== "trilinear") {
    throw new UsageError(`--upsample must be nearest or trilinear`);
  }
  const tap: TapSpec = {
    stages: require(values.stages, "--stages").split(",").filter((s) => s.length),
    head: values.head,
    patch: parseTriple(require(values.patch, "--patch"), "--patch"),
    stride: parseTriple(require(values.stride, "--stride"), "--stride"),
    upsampleMode,
  };
  const model = loadModel(require(values.model, "--model"));
  const casePaths = require(values.cases, "--cases").split(",").filter((s) => s.length);
  if (casePaths.length === 0) {
    throw new UsageError("--cases lists no files");
  }
  const cfg = samplingFromFlags(values);
  const shard =
    values["shard-count"] !== undefined
      ? {
          index: parseCount(values["shard-index"], "--shard-index", 0),
          count: parseCount(values["shard-count"], "--shard-count", 1),
        }
      : undefined;
  const result = exportDataset(
    model,
    casePaths,
    tap,
    cfg,
    require(values.out, "--out"),
    loadCaseVolume,
    shard,
    (line) => console.error(line),
  );
  console.log(
    JSON.stringify({
      exported: result.exported.length,
      skipped: result.skipped.length,
      failed: result.failed.length,
    }),
  );
  return result.failed.length > 0 ? 1 : 0;
}

function cmdMakeFixtures(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      out: { type: "string" },
      seed: { type: "string" },
      cases: { type: "string" },
    },
  });
  let seed = 7n;
  if (values.seed !== undefined) {
    try {
      seed = BigInt(values.seed);
    } catch {
      throw new UsageError(`bad --seed "${values.seed}"`);
    }
  }
  const cases = parseCount(values.cases, "--cases", 3);
  const manifest = makeFixtures(require(values.out, "--out"), seed, cases);
  console.log(JSON.stringify(manifest));
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "export":
        return cmdExport(rest);
      case "make-fixtures":
        return cmdMakeFixtures(rest);
      default:
        throw new UsageError(
          `unknown command "${command ?? ""}"; expected export or make-fixtures`,
        );
    }
  } catch (err) {
    // Per-case failures are collected inside exportDataset; anything that
    // escapes to here is a usage or environment problem.
    if (err instanceof Error) {
      console.error(err instanceof UsageError ? `usage error: ${err.message}` : err.message);
      return 2;
    }
    throw err;
  }
}

if (
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href
) {
  process.exit(main(process.argv.slice(2)));
}
