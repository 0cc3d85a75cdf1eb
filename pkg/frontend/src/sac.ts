/** Multi-agent soft actor-critic with centralized twin critics.
 *
 * One actor per agent acts on its own observation; each agent's two
 * critics (and their targets) score the joint (observations, actions).
 * Temperatures auto-tune toward a target entropy. Targets follow the
 * online critics through soft updates.
 */

import { Adam, Rng, mean, zeros } from "./math.js";
import { Mlp, mlp } from "./mlp.js";
import { Policy, Sample } from "./policy.js";
import { ReplayBuffer, Transition } from "./replay.js";

export interface SacConfig {
  K: number;
  obsDim: number; // per agent
  actDim: number; // per agent
  nsDiag: number;
  aMax: number;
  gamma: number;
  tau: number; // soft update rate
  lrActor: number;
  lrCritic: number;
  lrAlpha: number;
  targetEntropy: number;
  actorHidden: number[];
  criticHidden: number[];
  batch: number;
  seed: number;
}

export function defaultConfig(K: number, obsDim: number, actDim: number, nsDiag: number): SacConfig {
  return {
    K,
    obsDim,
    actDim,
    nsDiag,
    aMax: 2.0,
    gamma: 0.9,
    tau: 0.005,
    lrActor: 3e-4,
    lrCritic: 3e-4,
    lrAlpha: 3e-3,
    targetEntropy: -actDim,
    actorHidden: [128, 128],
    criticHidden: [256, 256],
    batch: 256,
    seed: 1,
  };
}

export class Agent {
  policy: Policy;
  q1: Mlp;
  q2: Mlp;
  q1Target: Mlp;
  q2Target: Mlp;
  alpha: number;
  optActor: Adam;
  optQ1: Adam;
  optQ2: Adam;

  constructor(cfg: SacConfig, rng: Rng) {
    const jointDim = cfg.K * (cfg.obsDim + cfg.actDim);
    this.policy = new Policy(cfg.obsDim, cfg.actDim, cfg.nsDiag, cfg.aMax, cfg.actorHidden, rng);
    this.q1 = mlp([jointDim, ...cfg.criticHidden, 1], "relu", rng);
    this.q2 = mlp([jointDim, ...cfg.criticHidden, 1], "relu", rng);
    this.q1Target = mlp([jointDim, ...cfg.criticHidden, 1], "relu");
    this.q2Target = mlp([jointDim, ...cfg.criticHidden, 1], "relu");
    this.q1Target.copyFrom(this.q1);
    this.q2Target.copyFrom(this.q2);
    this.alpha = 0.2;
    this.optActor = new Adam(this.policy.net.size, cfg.lrActor);
    this.optQ1 = new Adam(this.q1.size, cfg.lrCritic);
    this.optQ2 = new Adam(this.q2.size, cfg.lrCritic);
  }
}

export function jointInput(obs: Float64Array[], acts: Float64Array[]): Float64Array {
  let n = 0;
  for (const o of obs) n += o.length;
  for (const a of acts) n += a.length;
  const out = zeros(n);
  let pos = 0;
  for (const o of obs) {
    out.set(o, pos);
    pos += o.length;
  }
  for (const a of acts) {
    out.set(a, pos);
    pos += a.length;
  }
  return out;
}

export interface StepStats {
  criticLoss: number;
  actorLoss: number;
  alphaMean: number;
  entropyEstimate: number;
}

export class Sac {
  readonly agents: Agent[] = [];
  readonly rng: Rng;
  useTwinMin = true; // ablation hook for tests

  constructor(public readonly cfg: SacConfig) {
    this.rng = new Rng(cfg.seed);
    for (let k = 0; k < cfg.K; k++) this.agents.push(new Agent(cfg, this.rng));
  }

  /** Critic regression targets y_k for a batch (no gradients). */
  targets(batch: Transition[]): Float64Array[] {
    const { K, gamma } = this.cfg;
    const nextSamples: Sample[][] = batch.map((tr) =>
      this.agents.map((ag, k) => ag.policy.sample(tr.nextObs[k], this.rng)),
    );
    const ys: Float64Array[] = [];
    for (let k = 0; k < K; k++) {
      const y = zeros(batch.length);
      for (let b = 0; b < batch.length; b++) {
        const nextActs = nextSamples[b].map((s) => s.action);
        const input = jointInput(batch[b].nextObs, nextActs);
        const q1 = this.agents[k].q1Target.forward(input).out[0];
        const q2 = this.agents[k].q2Target.forward(input).out[0];
        const qMin = this.useTwinMin ? Math.min(q1, q2) : q1;
        y[b] =
          batch[b].reward[k] +
          gamma * (qMin - this.agents[k].alpha * nextSamples[b][k].logProb);
      }
      ys.push(y);
    }
    return ys;
  }

  /** One optimization step over a sampled batch. */
  step(buffer: ReplayBuffer): StepStats {
    const { K, batch } = this.cfg;
    const trs = buffer.sample(Math.min(batch, buffer.size), this.rng);
    const ys = this.targets(trs);

    // critics
    let criticLoss = 0;
    for (let k = 0; k < K; k++) {
      const ag = this.agents[k];
      for (const [net, opt] of [
        [ag.q1, ag.optQ1],
        [ag.q2, ag.optQ2],
      ] as const) {
        const grads = zeros(net.size);
        let loss = 0;
        for (let b = 0; b < trs.length; b++) {
          const input = jointInput(trs[b].obs, trs[b].act);
          const { out, acts } = net.forward(input);
          const err = out[0] - ys[k][b];
          loss += 0.5 * err * err;
          net.backward(acts, Float64Array.of(err / trs.length), grads);
        }
        opt.step(net.params, grads);
        criticLoss += loss / trs.length;
      }
    }

    // actors: fresh joint actions, gradient flows through agent k's sample
    let actorLoss = 0;
    const logProbs: number[] = [];
    for (let k = 0; k < K; k++) {
      const ag = this.agents[k];
      const grads = zeros(ag.policy.net.size);
      let loss = 0;
      for (let b = 0; b < trs.length; b++) {
        const samples = this.agents.map((a, j) => a.policy.sample(trs[b].obs[j], this.rng));
        const actsNow = samples.map((s) => s.action);
        const input = jointInput(trs[b].obs, actsNow);
        const f1 = ag.q1.forward(input);
        const f2 = ag.q2.forward(input);
        const useQ1 = !this.useTwinMin || f1.out[0] <= f2.out[0];
        const qNet = useQ1 ? ag.q1 : ag.q2;
        const qFwd = useQ1 ? f1 : f2;
        const qVal = qFwd.out[0];
        loss += ag.alpha * samples[k].logProb - qVal;
        logProbs.push(samples[k].logProb);
        // dLoss/dQ = -1 -> backprop to the joint input, slice agent k's action
        const qInputGrads = zeros(qNet.size);
        const dIn = qNet.backward(qFwd.acts, Float64Array.of(-1 / trs.length), qInputGrads);
        const base = K * this.cfg.obsDim + k * this.cfg.actDim;
        const dLdAction = dIn.slice(base, base + this.cfg.actDim);
        ag.policy.backward(samples[k], dLdAction, ag.alpha / trs.length, grads);
      }
      ag.optActor.step(ag.policy.net.params, grads);
      actorLoss += loss / trs.length;
    }

    // temperatures: alpha <- alpha + lr * E[log pi + targetEntropy]
    const perAgent = trs.length;
    for (let k = 0; k < K; k++) {
      const slice = logProbs.slice(k * perAgent, (k + 1) * perAgent);
      const drift = mean(slice) + this.cfg.targetEntropy;
      this.agents[k].alpha = Math.max(1e-8, this.agents[k].alpha + this.cfg.lrAlpha * drift);
    }

    // soft target updates
    for (const ag of this.agents) {
      ag.q1Target.softUpdateFrom(ag.q1, this.cfg.tau);
      ag.q2Target.softUpdateFrom(ag.q2, this.cfg.tau);
    }

    return {
      criticLoss: criticLoss / K,
      actorLoss: actorLoss / K,
      alphaMean: mean(this.agents.map((a) => a.alpha)),
      entropyEstimate: -mean(logProbs),
    };
  }

  /** Checkpoint: flat parameter arrays per agent plus temperatures. */
  checkpoint(): object {
    return {
      agents: this.agents.map((ag) => ({
        actor: Array.from(ag.policy.net.params),
        q1: Array.from(ag.q1.params),
        q2: Array.from(ag.q2.params),
        q1Target: Array.from(ag.q1Target.params),
        q2Target: Array.from(ag.q2Target.params),
        alpha: ag.alpha,
      })),
    };
  }

  restore(doc: {
    agents: {
      actor: number[];
      q1: number[];
      q2: number[];
      q1Target: number[];
      q2Target: number[];
      alpha: number;
    }[];
  }): void {
    if (doc.agents.length !== this.agents.length) throw new Error("checkpoint agent count mismatch");
    doc.agents.forEach((entry, k) => {
      const ag = this.agents[k];
      ag.policy.net.params.set(entry.actor);
      ag.q1.params.set(entry.q1);
      ag.q2.params.set(entry.q2);
      ag.q1Target.params.set(entry.q1Target);
      ag.q2Target.params.set(entry.q2Target);
      ag.alpha = entry.alpha;
    });
  }
}
