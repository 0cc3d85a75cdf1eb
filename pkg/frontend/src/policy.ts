/** Squashed-Gaussian actor head.
 *
 * The network emits (mu, logStd) per action dimension. Samples are
 * reparameterized z = mu + std*eps and squashed per dimension: the Ns
 * diagonal entries of the weight factor go through softplus(z) + 1e-3
 * (strictly positive), everything else through aMax*tanh(z). logProb
 * includes the change-of-variables terms, so gradients flow through both
 * the density and the squash.
 */

import { Rng, sigmoid, softplus, zeros } from "./math.js";
import { Mlp, mlp } from "./mlp.js";

const LOG_STD_MIN = -8;
const LOG_STD_MAX = 2;
const DIAG_SHIFT = 1e-3;

export interface Sample {
  action: Float64Array;
  logProb: number;
  z: Float64Array;
  mu: Float64Array;
  logStd: Float64Array;
  eps: Float64Array;
  acts: Float64Array[];
}

export class Policy {
  readonly net: Mlp;

  constructor(
    public readonly obsDim: number,
    public readonly actDim: number,
    public readonly nsDiag: number,
    public readonly aMax: number,
    hidden: number[],
    rng: Rng,
  ) {
    this.net = mlp([obsDim, ...hidden, 2 * actDim], "relu", rng);
  }

  private squash(z: number, d: number): number {
    return d < this.nsDiag ? softplus(z) + DIAG_SHIFT : this.aMax * Math.tanh(z);
  }

  /** d log|da/dz| terms and the jacobian value, per dimension. */
  private logJac(z: number, d: number): number {
    if (d < this.nsDiag) return Math.log(sigmoid(z));
    const t = Math.tanh(z);
    return Math.log(this.aMax * (1 - t * t) + 1e-12);
  }

  sample(obs: ArrayLike<number>, rng: Rng): Sample {
    const eps = zeros(this.actDim);
    for (let d = 0; d < this.actDim; d++) eps[d] = rng.gaussian();
    return this.sampleWith(obs, eps);
  }

  /** Reparameterized sample with externally supplied noise (gradient
   * checks and replay need a fixed eps). */
  sampleWith(obs: ArrayLike<number>, eps: Float64Array): Sample {
    const { out, acts } = this.net.forward(obs);
    const mu = out.slice(0, this.actDim);
    const logStd = zeros(this.actDim);
    const z = zeros(this.actDim);
    const action = zeros(this.actDim);
    let logProb = 0;
    for (let d = 0; d < this.actDim; d++) {
      logStd[d] = Math.min(LOG_STD_MAX, Math.max(LOG_STD_MIN, out[this.actDim + d]));
      const std = Math.exp(logStd[d]);
      z[d] = mu[d] + std * eps[d];
      action[d] = this.squash(z[d], d);
      logProb +=
        -0.5 * eps[d] * eps[d] - logStd[d] - 0.5 * Math.log(2 * Math.PI) - this.logJac(z[d], d);
    }
    return { action, logProb, z, mu, logStd, eps, acts };
  }

  /** Deterministic action (mean of the pre-squash Gaussian). */
  act(obs: ArrayLike<number>): Float64Array {
    const { out } = this.net.forward(obs);
    const action = zeros(this.actDim);
    for (let d = 0; d < this.actDim; d++) action[d] = this.squash(out[d], d);
    return action;
  }

  /** dAction/dz at a sample (diagonal jacobian). */
  dActionDz(s: Sample): Float64Array {
    const out = zeros(this.actDim);
    for (let d = 0; d < this.actDim; d++) {
      if (d < this.nsDiag) {
        out[d] = sigmoid(s.z[d]);
      } else {
        const t = Math.tanh(s.z[d]);
        out[d] = this.aMax * (1 - t * t);
      }
    }
    return out;
  }

  /** d logProb / dz under the reparameterization (eps held fixed): the
   * Gaussian density contributes only through -logStd, so the z-dependence
   * reduces to the change-of-variables jacobian term. */
  dLogProbDz(s: Sample): Float64Array {
    const out = zeros(this.actDim);
    for (let d = 0; d < this.actDim; d++) {
      if (d < this.nsDiag) {
        // -d/dz log sigmoid(z)
        out[d] = -(1 - sigmoid(s.z[d]));
      } else {
        // -d/dz log(aMax (1 - tanh^2 z)) = 2 tanh(z), with the epsilon guard
        const t = Math.tanh(s.z[d]);
        out[d] = (2 * t * (1 - t * t) * this.aMax) / (this.aMax * (1 - t * t) + 1e-12);
      }
    }
    return out;
  }

  /** Backprop a loss of the form sum_d (gA[d]*dAction + gZ[d]*dz_extra +
   * gMu/gLogStd direct terms) into parameter grads.
   *
   * Callers supply dLoss/dAction (through the critic), plus the direct
   * dLoss/dLogProb scalar; this routine assembles dLoss/d(mu, logStd) via
   * the reparameterization z = mu + exp(logStd)*eps and the squash.
   */
  backward(s: Sample, dLdAction: Float64Array, dLdLogProb: number, grads: Float64Array): void {
    const dAdZ = this.dActionDz(s);
    const dLpDz = this.dLogProbDz(s);
    const dOut = zeros(2 * this.actDim);
    for (let d = 0; d < this.actDim; d++) {
      const std = Math.exp(s.logStd[d]);
      // total dL/dz through action and through logProb's z-dependence
      const dLdZ = dLdAction[d] * dAdZ[d] + dLdLogProb * dLpDz[d];
      // z = mu + std*eps; logProb also depends on logStd directly:
      // d logProb / d logStd (holding z's eps fixed) = -1
      dOut[d] = dLdZ; // d/d mu
      let dLogStd = dLdZ * std * s.eps[d] + dLdLogProb * -1;
      // clamp: no gradient outside the active range
      const raw = s.logStd[d];
      if (raw <= LOG_STD_MIN || raw >= LOG_STD_MAX) dLogStd = 0;
      dOut[this.actDim + d] = dLogStd;
    }
    this.net.backward(s.acts, dOut, grads);
  }
}
