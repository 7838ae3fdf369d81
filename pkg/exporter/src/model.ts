/**
 * A small sequential 3-D segmentation network loaded from JSON: a chain of
 * 3x3x3 convolutions (ReLU, padding 1, per-stage stride) whose outputs are
 * the tappable decoder stages, plus an optional 1x1x1 classification head on
 * the first (full-resolution) stage.
 *
 * Pure JS on purpose: it exists to exercise the export path, not to be fast.
 * All arithmetic is float64 and fully deterministic.
 */

export type Dims = [number, number, number];

export interface VolumeData {
  channels: number;
  dims: Dims;
  /** channel-major: data[c * X*Y*Z + voxel], voxel = (x*Y + y)*Z + z */
  data: Float64Array;
}

export interface StageSpec {
  name: string;
  channels: number;
  stride: number;
}

export interface HeadSpec {
  name: string;
  classes: number;
}

export interface ModelSpec {
  arch: string;
  inChannels: number;
  stages: StageSpec[];
  head?: HeadSpec;
  weights: Record<string, number[]>;
}

export class ModelError extends Error {}

const KERNEL = 3;
const PAD = 1;

function voxels(dims: Dims): number {
  return dims[0] * dims[1] * dims[2];
}

function convOutDims(dims: Dims, stride: number): Dims {
  return dims.map((d) => Math.floor((d + 2 * PAD - KERNEL) / stride) + 1) as Dims;
}

function conv3d(
  input: VolumeData,
  kernel: Float64Array,
  bias: Float64Array,
  outChannels: number,
  stride: number,
): VolumeData {
  const [X, Y, Z] = input.dims;
  const inC = input.channels;
  const outDims = convOutDims(input.dims, stride);
  const [OX, OY, OZ] = outDims;
  const out = new Float64Array(outChannels * OX * OY * OZ);
  const inPlane = Y * Z;
  const inVox = X * inPlane;
  for (let oc = 0; oc < outChannels; oc++) {
    const kBase = oc * inC * KERNEL * KERNEL * KERNEL;
    for (let ox = 0; ox < OX; ox++) {
      for (let oy = 0; oy < OY; oy++) {
        for (let oz = 0; oz < OZ; oz++) {
          let acc = bias[oc];
          for (let ic = 0; ic < inC; ic++) {
            const icBase = ic * inVox;
            const kcBase = kBase + ic * KERNEL * KERNEL * KERNEL;
            for (let kx = 0; kx < KERNEL; kx++) {
              const ix = ox * stride + kx - PAD;
              if (ix < 0 || ix >= X) continue;
              for (let ky = 0; ky < KERNEL; ky++) {
                const iy = oy * stride + ky - PAD;
                if (iy < 0 || iy >= Y) continue;
                for (let kz = 0; kz < KERNEL; kz++) {
                  const iz = oz * stride + kz - PAD;
                  if (iz < 0 || iz >= Z) continue;
                  acc +=
                    kernel[kcBase + (kx * KERNEL + ky) * KERNEL + kz] *
                    input.data[icBase + (ix * Y + iy) * Z + iz];
                }
              }
            }
          }
          out[oc * OX * OY * OZ + (ox * OY + oy) * OZ + oz] = acc > 0 ? acc : 0;
        }
      }
    }
  }
  return { channels: outChannels, dims: outDims, data: out };
}

export type UpsampleMode = "nearest" | "trilinear";

export function upsample(vol: VolumeData, outDims: Dims, mode: UpsampleMode): VolumeData {
  const [IX, IY, IZ] = vol.dims;
  const [OX, OY, OZ] = outDims;
  if (IX === OX && IY === OY && IZ === OZ) return vol;
  const out = new Float64Array(vol.channels * OX * OY * OZ);
  const inVox = IX * IY * IZ;
  const outVox = OX * OY * OZ;
  if (mode === "nearest") {
    for (let ox = 0; ox < OX; ox++) {
      const ix = Math.min(IX - 1, Math.floor((ox * IX) / OX));
      for (let oy = 0; oy < OY; oy++) {
        const iy = Math.min(IY - 1, Math.floor((oy * IY) / OY));
        for (let oz = 0; oz < OZ; oz++) {
          const iz = Math.min(IZ - 1, Math.floor((oz * IZ) / OZ));
          const src = (ix * IY + iy) * IZ + iz;
          const dst = (ox * OY + oy) * OZ + oz;
          for (let c = 0; c < vol.channels; c++) {
            out[c * outVox + dst] = vol.data[c * inVox + src];
          }
        }
      }
    }
    return { channels: vol.channels, dims: outDims, data: out };
  }
  // Trilinear, center-aligned: source coord (o + 0.5) * in/out - 0.5, clamped.
  const axis = (o: number, inD: number, outD: number): [number, number, number] => {
    const coord = Math.min(inD - 1, Math.max(0, ((o + 0.5) * inD) / outD - 0.5));
    const lo = Math.min(inD - 1, Math.floor(coord));
    const hi = Math.min(inD - 1, lo + 1);
    return [lo, hi, coord - lo];
  };
  for (let ox = 0; ox < OX; ox++) {
    const [x0, x1, fx] = axis(ox, IX, OX);
    for (let oy = 0; oy < OY; oy++) {
      const [y0, y1, fy] = axis(oy, IY, OY);
      for (let oz = 0; oz < OZ; oz++) {
        const [z0, z1, fz] = axis(oz, IZ, OZ);
        const dst = (ox * OY + oy) * OZ + oz;
        for (let c = 0; c < vol.channels; c++) {
          const base = c * inVox;
          const at = (x: number, y: number, z: number) =>
            vol.data[base + (x * IY + y) * IZ + z];
          const c00 = at(x0, y0, z0) * (1 - fz) + at(x0, y0, z1) * fz;
          const c01 = at(x0, y1, z0) * (1 - fz) + at(x0, y1, z1) * fz;
          const c10 = at(x1, y0, z0) * (1 - fz) + at(x1, y0, z1) * fz;
          const c11 = at(x1, y1, z0) * (1 - fz) + at(x1, y1, z1) * fz;
          const c0 = c00 * (1 - fy) + c01 * fy;
          const c1 = c10 * (1 - fy) + c11 * fy;
          out[c * outVox + dst] = c0 * (1 - fx) + c1 * fx;
        }
      }
    }
  }
  return { channels: vol.channels, dims: outDims, data: out };
}

export interface ForwardResult {
  /** stage name -> output at that stage's own resolution */
  stages: Map<string, VolumeData>;
  /** softmax over head classes, full resolution, or null without a head */
  softmax: VolumeData | null;
}

export class TinySegNet {
  private constructor(
    readonly spec: ModelSpec,
    private kernels: Map<string, Float64Array>,
    private biases: Map<string, Float64Array>,
  ) {}

  get stageNames(): string[] {
    return this.spec.stages.map((s) => s.name);
  }

  static fromSpec(spec: ModelSpec): TinySegNet {
    if (spec.arch !== "tiny-segnet3d") {
      throw new ModelError(`unsupported arch "${spec.arch}"`);
    }
    if (!Number.isInteger(spec.inChannels) || spec.inChannels < 1) {
      throw new ModelError("inChannels must be a positive integer");
    }
    if (spec.stages.length === 0) {
      throw new ModelError("model needs at least one stage");
    }
    const kernels = new Map<string, Float64Array>();
    const biases = new Map<string, Float64Array>();
    const take = (name: string, expected: number): Float64Array => {
      const raw = spec.weights[name];
      if (raw === undefined) {
        throw new ModelError(`missing weight tensor "${name}"`);
      }
      if (raw.length !== expected) {
        throw new ModelError(
          `weight "${name}" has ${raw.length} values, expected ${expected}`,
        );
      }
      return Float64Array.from(raw);
    };
    let inC = spec.inChannels;
    for (const stage of spec.stages) {
      if (stage.stride < 1) {
        throw new ModelError(`stage "${stage.name}" stride must be >= 1`);
      }
      kernels.set(
        stage.name,
        take(`${stage.name}.kernel`, stage.channels * inC * KERNEL ** 3),
      );
      biases.set(stage.name, take(`${stage.name}.bias`, stage.channels));
      inC = stage.channels;
    }
    if (spec.head) {
      const headIn = spec.stages[0].channels;
      kernels.set(
        spec.head.name,
        take(`${spec.head.name}.kernel`, spec.head.classes * headIn),
      );
      biases.set(spec.head.name, take(`${spec.head.name}.bias`, spec.head.classes));
    }
    return new TinySegNet(spec, kernels, biases);
  }

  forward(image: Float64Array, dims: Dims): ForwardResult {
    if (image.length !== this.spec.inChannels * voxels(dims)) {
      throw new ModelError(
        `image has ${image.length} values, expected ${this.spec.inChannels * voxels(dims)}`,
      );
    }
    let current: VolumeData = { channels: this.spec.inChannels, dims, data: image };
    const stages = new Map<string, VolumeData>();
    for (const stage of this.spec.stages) {
      current = conv3d(
        current,
        this.kernels.get(stage.name)!,
        this.biases.get(stage.name)!,
        stage.channels,
        stage.stride,
      );
      stages.set(stage.name, current);
    }
    let softmax: VolumeData | null = null;
    if (this.spec.head) {
      const first = stages.get(this.spec.stages[0].name)!;
      const classes = this.spec.head.classes;
      const kernel = this.kernels.get(this.spec.head.name)!;
      const bias = this.biases.get(this.spec.head.name)!;
      const vox = voxels(first.dims);
      const data = new Float64Array(classes * vox);
      const logits = new Float64Array(classes);
      for (let v = 0; v < vox; v++) {
        let peak = -Infinity;
        for (let k = 0; k < classes; k++) {
          let acc = bias[k];
          for (let c = 0; c < first.channels; c++) {
            acc += kernel[k * first.channels + c] * first.data[c * vox + v];
          }
          logits[k] = acc;
          if (acc > peak) peak = acc;
        }
        let total = 0;
        for (let k = 0; k < classes; k++) {
          logits[k] = Math.exp(logits[k] - peak);
          total += logits[k];
        }
        for (let k = 0; k < classes; k++) {
          data[k * vox + v] = logits[k] / total;
        }
      }
      softmax = { channels: classes, dims: first.dims, data };
    }
    return { stages, softmax };
  }
}
