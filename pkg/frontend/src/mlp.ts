/** Dense MLP over a flat parameter vector, with explicit backprop. */

import { Rng, zeros } from "./math.js";

export type Activation = "relu" | "linear";

export interface LayerSpec {
  inDim: number;
  outDim: number;
  activation: Activation;
}

export class Mlp {
  readonly params: Float64Array;
  readonly size: number;
  private readonly offsets: number[] = [];

  constructor(public readonly layers: LayerSpec[], rng?: Rng) {
    let size = 0;
    for (const l of layers) {
      this.offsets.push(size);
      size += l.outDim * l.inDim + l.outDim;
    }
    this.size = size;
    this.params = zeros(size);
    if (rng) this.init(rng);
  }

  init(rng: Rng): void {
    for (let li = 0; li < this.layers.length; li++) {
      const { inDim, outDim } = this.layers[li];
      const off = this.offsets[li];
      const bound = Math.sqrt(6 / (inDim + outDim));
      for (let i = 0; i < outDim * inDim; i++) {
        this.params[off + i] = rng.uniform(-bound, bound);
      }
      // biases start at zero
    }
  }

  get inDim(): number {
    return this.layers[0].inDim;
  }

  get outDim(): number {
    return this.layers[this.layers.length - 1].outDim;
  }

  /** Forward pass; caches are returned for backward. */
  forward(x: ArrayLike<number>): { out: Float64Array; acts: Float64Array[] } {
    let h: Float64Array = Float64Array.from(x as ArrayLike<number>);
    const acts: Float64Array[] = [h];
    for (let li = 0; li < this.layers.length; li++) {
      const { inDim, outDim, activation } = this.layers[li];
      const off = this.offsets[li];
      const out = zeros(outDim);
      for (let o = 0; o < outDim; o++) {
        let s = this.params[off + outDim * inDim + o];
        const row = off + o * inDim;
        for (let i = 0; i < inDim; i++) s += this.params[row + i] * h[i];
        out[o] = activation === "relu" && s < 0 ? 0 : s;
      }
      acts.push(out);
      h = out;
    }
    return { out: h, acts };
  }

  /** Backprop dLoss/dOut into parameter grads (accumulated) and dLoss/dIn. */
  backward(
    acts: Float64Array[],
    dOut: Float64Array,
    grads: Float64Array,
  ): Float64Array {
    let delta: Float64Array = Float64Array.from(dOut);
    for (let li = this.layers.length - 1; li >= 0; li--) {
      const { inDim, outDim, activation } = this.layers[li];
      const off = this.offsets[li];
      const hIn = acts[li];
      const hOut = acts[li + 1];
      if (activation === "relu") {
        for (let o = 0; o < outDim; o++) if (hOut[o] <= 0) delta[o] = 0;
      }
      const dIn = zeros(inDim);
      for (let o = 0; o < outDim; o++) {
        const row = off + o * inDim;
        const d = delta[o];
        grads[off + outDim * inDim + o] += d;
        for (let i = 0; i < inDim; i++) {
          grads[row + i] += d * hIn[i];
          dIn[i] += this.params[row + i] * d;
        }
      }
      delta = dIn;
    }
    return delta;
  }

  copyFrom(other: Mlp): void {
    this.params.set(other.params);
  }

  softUpdateFrom(online: Mlp, tau: number): void {
    for (let i = 0; i < this.size; i++) {
      this.params[i] = tau * online.params[i] + (1 - tau) * this.params[i];
    }
  }

  /** Weight/bias views for export (row-major weights, matching the
   * portable surrogate format). */
  layerWeights(li: number): { weights: Float64Array; bias: Float64Array } {
    const { inDim, outDim } = this.layers[li];
    const off = this.offsets[li];
    return {
      weights: this.params.slice(off, off + outDim * inDim),
      bias: this.params.slice(off + outDim * inDim, off + outDim * inDim + outDim),
    };
  }
}

export function mlp(dims: number[], hiddenAct: Activation, rng?: Rng): Mlp {
  const layers: LayerSpec[] = [];
  for (let i = 0; i + 1 < dims.length; i++) {
    layers.push({
      inDim: dims[i],
      outDim: dims[i + 1],
      activation: i + 2 < dims.length ? hiddenAct : "linear",
    });
  }
  return new Mlp(layers, rng);
}
