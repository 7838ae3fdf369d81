/** Labeled case volumes (JSON on disk) and sliding-window patch geometry. */

import { readFileSync } from "node:fs";

import type { Dims } from "./model.js";

export interface CaseVolume {
  caseId: string;
  dims: Dims;
  /** single input channel, voxel-major: (x * Y + y) * Z + z */
  image: Float64Array;
  labels: Int32Array;
}

export class VolumeError extends Error {}

export function loadCaseVolume(path: string): CaseVolume {
  let obj: unknown;
  try {
    obj = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new VolumeError(`${path}: ${(err as Error).message}`);
  }
  const rec = obj as Record<string, unknown>;
  const caseId = rec.caseId;
  const dims = rec.dims;
  const image = rec.image;
  const labels = rec.labels;
  if (typeof caseId !== "string" || caseId.length === 0) {
    throw new VolumeError(`${path}: caseId must be a non-empty string`);
  }
  if (
    !Array.isArray(dims) ||
    dims.length !== 3 ||
    dims.some((d) => !Number.isInteger(d) || d < 1)
  ) {
    throw new VolumeError(`${path}: dims must be three positive integers`);
  }
  const vox = (dims as number[]).reduce((a, b) => a * b, 1);
  if (!Array.isArray(image) || image.length !== vox) {
    throw new VolumeError(`${path}: image must hold ${vox} values`);
  }
  if (!Array.isArray(labels) || labels.length !== vox) {
    throw new VolumeError(`${path}: labels must hold ${vox} values`);
  }
  const img = Float64Array.from(image as number[]);
  for (const v of img) {
    if (!Number.isFinite(v)) throw new VolumeError(`${path}: non-finite image value`);
  }
  const lab = Int32Array.from(labels as number[]);
  for (let i = 0; i < lab.length; i++) {
    if (lab[i] < 0 || (labels as number[])[i] !== lab[i]) {
      throw new VolumeError(`${path}: labels must be non-negative integers`);
    }
  }
  return { caseId, dims: dims as Dims, image: img, labels: lab };
}

/** Window start offsets covering [0, dim): stride steps, last start clamped. */
export function axisStarts(dim: number, patch: number, stride: number): number[] {
  if (patch > dim) {
    throw new VolumeError(`patch size ${patch} exceeds volume extent ${dim}`);
  }
  if (stride < 1 || stride > patch) {
    throw new VolumeError(`stride ${stride} outside 1..patch(${patch})`);
  }
  const starts: number[] = [];
  for (let s = 0; s + patch < dim; s += stride) starts.push(s);
  const last = dim - patch;
  if (starts.length === 0 || starts[starts.length - 1] !== last) starts.push(last);
  return starts;
}

export interface PatchOrigin {
  origin: Dims;
}

export function patchGrid(dims: Dims, patch: Dims, stride: Dims): PatchOrigin[] {
  const xs = axisStarts(dims[0], patch[0], stride[0]);
  const ys = axisStarts(dims[1], patch[1], stride[1]);
  const zs = axisStarts(dims[2], patch[2], stride[2]);
  const out: PatchOrigin[] = [];
  for (const x of xs) {
    for (const y of ys) {
      for (const z of zs) {
        out.push({ origin: [x, y, z] });
      }
    }
  }
  return out;
}

function extract<T extends Float64Array | Int32Array>(
  src: T,
  dims: Dims,
  origin: Dims,
  patch: Dims,
  make: (n: number) => T,
): T {
  const [, Y, Z] = dims;
  const [PX, PY, PZ] = patch;
  const out = make(PX * PY * PZ);
  let w = 0;
  for (let x = 0; x < PX; x++) {
    for (let y = 0; y < PY; y++) {
      const base = ((origin[0] + x) * Y + (origin[1] + y)) * Z + origin[2];
      for (let z = 0; z < PZ; z++) {
        out[w++] = src[base + z];
      }
    }
  }
  return out;
}

export function extractImagePatch(
  vol: CaseVolume,
  origin: Dims,
  patch: Dims,
): Float64Array {
  return extract(vol.image, vol.dims, origin, patch, (n) => new Float64Array(n));
}

export function extractLabelPatch(
  vol: CaseVolume,
  origin: Dims,
  patch: Dims,
): Int32Array {
  return extract(vol.labels, vol.dims, origin, patch, (n) => new Int32Array(n));
}
