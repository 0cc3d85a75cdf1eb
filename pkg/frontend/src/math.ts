/** Deterministic RNG, Adam, and small vector helpers. */

export class Rng {
  private s: number;

  constructor(seed: number) {
    this.s = seed >>> 0;
  }

  /** mulberry32 */
  next(): number {
    this.s = (this.s + 0x6d2b79f5) >>> 0;
    let t = this.s;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  uniform(lo: number, hi: number): number {
    return lo + (hi - lo) * this.next();
  }

  /** Box-Muller, no spare caching so draws are position-independent. */
  gaussian(): number {
    let u = 0;
    while (u === 0) u = this.next();
    const v = this.next();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  }

  int(n: number): number {
    return Math.floor(this.next() * n) % n;
  }
}

export function zeros(n: number): Float64Array {
  return new Float64Array(n);
}

export function mean(xs: ArrayLike<number>): number {
  let s = 0;
  for (let i = 0; i < xs.length; i++) s += xs[i];
  return s / xs.length;
}

export function softplus(x: number): number {
  return x > 30 ? x : Math.log1p(Math.exp(x));
}

export function sigmoid(x: number): number {
  return x >= 0 ? 1 / (1 + Math.exp(-x)) : Math.exp(x) / (1 + Math.exp(x));
}

/** Adam over a flat parameter vector. */
export class Adam {
  private m: Float64Array;
  private v: Float64Array;
  private t = 0;

  constructor(
    private readonly size: number,
    public lr: number,
    private readonly beta1 = 0.9,
    private readonly beta2 = 0.999,
    private readonly eps = 1e-8,
  ) {
    this.m = zeros(size);
    this.v = zeros(size);
  }

  step(params: Float64Array, grads: Float64Array): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let i = 0; i < this.size; i++) {
      const g = grads[i];
      this.m[i] = this.beta1 * this.m[i] + (1 - this.beta1) * g;
      this.v[i] = this.beta2 * this.v[i] + (1 - this.beta2) * g * g;
      params[i] -= (this.lr * (this.m[i] / c1)) / (Math.sqrt(this.v[i] / c2) + this.eps);
    }
  }
}

/** Per-feature running mean/std for observation standardization. */
export class RunningNorm {
  count = 0;
  private meanV: Float64Array;
  private m2: Float64Array;

  constructor(public readonly dim: number) {
    this.meanV = zeros(dim);
    this.m2 = zeros(dim);
  }

  update(x: ArrayLike<number>): void {
    this.count += 1;
    for (let i = 0; i < this.dim; i++) {
      const d = x[i] - this.meanV[i];
      this.meanV[i] += d / this.count;
      this.m2[i] += d * (x[i] - this.meanV[i]);
    }
  }

  apply(x: ArrayLike<number>): Float64Array {
    const out = zeros(this.dim);
    for (let i = 0; i < this.dim; i++) {
      const varI = this.count > 1 ? this.m2[i] / (this.count - 1) : 1;
      out[i] = (x[i] - this.meanV[i]) / Math.sqrt(varI + 1e-8);
    }
    return out;
  }
}
