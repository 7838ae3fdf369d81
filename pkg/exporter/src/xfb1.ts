/**
 * XFB1 feature-bundle serialization: the little-endian binary layout the
 * scorer reads. Magic "XFERFVB1", u32 headers, f32 payloads; one file per
 * case holding per-scale class samples, global samples, and optional
 * source-head posteriors.
 */

export const MAGIC = "XFERFVB1";
export const VERSION = 1;
export const POSTERIOR_ROW_SUM_TOL = 1e-3;

export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array;
}

export function matrix(rows: number, cols: number, data?: Float64Array): Matrix {
  const need = rows * cols;
  if (data !== undefined && data.length !== need) {
    throw new RangeError(`matrix data length ${data.length}, expected ${need}`);
  }
  return { rows, cols, data: data ?? new Float64Array(need) };
}

export interface ScaleSamples {
  channels: number;
  classSamples: Map<number, Matrix>;
  globalSamples: Matrix;
  sourcePosteriors: Matrix | null;
}

export interface CaseBundle {
  caseId: string;
  numClasses: number;
  scales: ScaleSamples[];
}

export class BundleError extends Error {}

function allFinite(m: Matrix): boolean {
  for (let i = 0; i < m.data.length; i++) {
    if (!Number.isFinite(m.data[i])) return false;
  }
  return true;
}

function classSampleRows(scale: ScaleSamples): number {
  let total = 0;
  for (const m of scale.classSamples.values()) total += m.rows;
  return total;
}

/** Throws on the first invariant violation; mirrors the scorer's rules. */
export function checkBundle(bundle: CaseBundle): void {
  if (bundle.scales.length === 0) {
    throw new BundleError("bundle has no scales");
  }
  if (bundle.numClasses < 2) {
    throw new BundleError(`numClasses=${bundle.numClasses}, need >= 2`);
  }
  bundle.scales.forEach((scale, idx) => {
    const si = idx + 1;
    for (const [classId, m] of scale.classSamples) {
      if (classId === 0) {
        throw new BundleError(`scale ${si}: class 0 must not carry samples`);
      }
      if (!(classId >= 1 && classId < bundle.numClasses)) {
        throw new BundleError(
          `scale ${si}: class id ${classId} outside 1..${bundle.numClasses - 1}`,
        );
      }
      if (m.rows === 0) {
        throw new BundleError(`scale ${si}: class ${classId} entry has zero rows`);
      }
      if (m.cols !== scale.channels) {
        throw new BundleError(
          `scale ${si}: class ${classId} has ${m.cols} columns, expected ${scale.channels}`,
        );
      }
      if (!allFinite(m)) {
        throw new BundleError(`scale ${si}: class ${classId} contains NaN or Inf`);
      }
    }
    if (scale.globalSamples.cols !== scale.channels) {
      throw new BundleError(`scale ${si}: global sample column mismatch`);
    }
    if (!allFinite(scale.globalSamples)) {
      throw new BundleError(`scale ${si}: global samples contain NaN or Inf`);
    }
    const post = scale.sourcePosteriors;
    if (post !== null) {
      if (post.rows !== classSampleRows(scale)) {
        throw new BundleError(
          `scale ${si}: ${post.rows} posterior rows vs ${classSampleRows(scale)} class-sample rows`,
        );
      }
      if (!allFinite(post)) {
        throw new BundleError(`scale ${si}: posteriors contain NaN or Inf`);
      }
      for (let r = 0; r < post.rows; r++) {
        let sum = 0;
        for (let c = 0; c < post.cols; c++) {
          const v = post.data[r * post.cols + c];
          if (v < 0) {
            throw new BundleError(`scale ${si}: negative posterior entry`);
          }
          sum += Math.fround(v);
        }
        if (Math.abs(sum - 1) > POSTERIOR_ROW_SUM_TOL) {
          throw new BundleError(
            `scale ${si}: posterior row ${r} sums to ${sum.toFixed(6)}`,
          );
        }
      }
    }
  });
}

export function writeCaseBundle(bundle: CaseBundle): Uint8Array {
  checkBundle(bundle);
  const idBytes = Buffer.from(bundle.caseId, "utf-8");
  let size = 8 + 4 + 4 + idBytes.length + 4 + 4;
  for (const scale of bundle.scales) {
    size += 4 + 4;
    for (const m of scale.classSamples.values()) {
      size += 4 + 4 + 4 * m.rows * m.cols;
    }
    size += 4 + 4 * scale.globalSamples.rows * scale.globalSamples.cols;
    size += 4;
    if (scale.sourcePosteriors !== null) {
      const p = scale.sourcePosteriors;
      size += 4 + 4 + 4 * p.rows * p.cols;
    }
  }
  const out = new Uint8Array(size);
  const view = new DataView(out.buffer);
  let pos = 0;
  const u32 = (v: number) => {
    view.setUint32(pos, v, true);
    pos += 4;
  };
  const f32matrix = (m: Matrix) => {
    for (let i = 0; i < m.data.length; i++) {
      view.setFloat32(pos, m.data[i], true);
      pos += 4;
    }
  };
  out.set(Buffer.from(MAGIC, "ascii"), 0);
  pos = 8;
  u32(VERSION);
  u32(idBytes.length);
  out.set(idBytes, pos);
  pos += idBytes.length;
  u32(bundle.numClasses);
  u32(bundle.scales.length);
  for (const scale of bundle.scales) {
    u32(scale.channels);
    u32(scale.classSamples.size);
    const classIds = [...scale.classSamples.keys()].sort((a, b) => a - b);
    for (const classId of classIds) {
      const m = scale.classSamples.get(classId)!;
      u32(classId);
      u32(m.rows);
      f32matrix(m);
    }
    u32(scale.globalSamples.rows);
    f32matrix(scale.globalSamples);
    if (scale.sourcePosteriors === null) {
      u32(0);
    } else {
      u32(1);
      u32(scale.sourcePosteriors.cols);
      u32(scale.sourcePosteriors.rows);
      f32matrix(scale.sourcePosteriors);
    }
  }
  if (pos !== size) {
    throw new BundleError(`internal sizing error: wrote ${pos} of ${size}`);
  }
  return out;
}

class Cursor {
  pos = 0;

  constructor(
    private view: DataView,
    private len: number,
  ) {}

  u32(what: string): number {
    if (this.pos + 4 > this.len) {
      throw new BundleError(`truncated while reading ${what}`);
    }
    const v = this.view.getUint32(this.pos, true);
    this.pos += 4;
    return v;
  }

  f32matrix(rows: number, cols: number, what: string): Matrix {
    const bytes = 4 * rows * cols;
    if (this.pos + bytes > this.len) {
      throw new BundleError(`truncated while reading ${what}`);
    }
    const m = matrix(rows, cols);
    for (let i = 0; i < rows * cols; i++) {
      m.data[i] = this.view.getFloat32(this.pos, true);
      this.pos += 4;
    }
    if (!allFinite(m)) {
      throw new BundleError(`${what} contains NaN or Inf`);
    }
    return m;
  }
}

export function readCaseBundle(bytes: Uint8Array): CaseBundle {
  if (bytes.length < 8 || Buffer.from(bytes.subarray(0, 8)).toString("ascii") !== MAGIC) {
    throw new BundleError("bad magic");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const cur = new Cursor(view, bytes.length);
  cur.pos = 8;
  const version = cur.u32("version");
  if (version !== VERSION) {
    throw new BundleError(`unsupported version ${version}`);
  }
  const idLen = cur.u32("case id length");
  if (cur.pos + idLen > bytes.length) {
    throw new BundleError("truncated while reading case id");
  }
  const caseId = Buffer.from(bytes.subarray(cur.pos, cur.pos + idLen)).toString("utf-8");
  cur.pos += idLen;
  const numClasses = cur.u32("num classes");
  const nScales = cur.u32("scale count");
  const scales: ScaleSamples[] = [];
  for (let si = 1; si <= nScales; si++) {
    const channels = cur.u32(`scale ${si} channels`);
    const nEntries = cur.u32(`scale ${si} entry count`);
    const classSamples = new Map<number, Matrix>();
    for (let e = 0; e < nEntries; e++) {
      const classId = cur.u32(`scale ${si} class id`);
      const rows = cur.u32(`scale ${si} class ${classId} rows`);
      if (classSamples.has(classId)) {
        throw new BundleError(`scale ${si}: duplicate class entry ${classId}`);
      }
      classSamples.set(
        classId,
        cur.f32matrix(rows, channels, `scale ${si} class ${classId} samples`),
      );
    }
    const globalRows = cur.u32(`scale ${si} global rows`);
    const globalSamples = cur.f32matrix(
      globalRows,
      channels,
      `scale ${si} global samples`,
    );
    const hasPost = cur.u32(`scale ${si} posterior flag`);
    let sourcePosteriors: Matrix | null = null;
    if (hasPost === 1) {
      const srcClasses = cur.u32(`scale ${si} source class count`);
      const pRows = cur.u32(`scale ${si} posterior rows`);
      sourcePosteriors = cur.f32matrix(pRows, srcClasses, `scale ${si} posteriors`);
    } else if (hasPost !== 0) {
      throw new BundleError(`scale ${si}: posterior flag must be 0 or 1`);
    }
    scales.push({ channels, classSamples, globalSamples, sourcePosteriors });
  }
  if (cur.pos !== bytes.length) {
    throw new BundleError(
      `${bytes.length - cur.pos} trailing bytes after declared payload`,
    );
  }
  const bundle = { caseId, numClasses, scales };
  checkBundle(bundle);
  return bundle;
}
