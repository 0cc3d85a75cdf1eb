/** Collect/optimize driver against the environment bridge, plus a small
 * CLI: `node dist/train.js --config <scenario.json> [--episodes 20]`. */

import { EnvClient, ObsMsg } from "./bridge.js";
import { actDim, encodeAction, flattenObs, obsDim, validAction } from "./codec.js";
import { RunningNorm, mean } from "./math.js";
import { ReplayBuffer, Transition } from "./replay.js";
import { Sac, SacConfig, defaultConfig } from "./sac.js";

export interface Trainer {
  sac: Sac;
  buffer: ReplayBuffer;
  norms: RunningNorm[];
}

export function makeTrainer(client: EnvClient, overrides: Partial<SacConfig> = {}): Trainer {
  const { K, Nr, Ns, I_card } = client.hello;
  const cfg = {
    ...defaultConfig(K, obsDim(Nr, Ns, I_card), actDim(Nr, Ns), Ns),
    ...overrides,
  };
  const sac = new Sac(cfg);
  return {
    sac,
    buffer: new ReplayBuffer(100_000),
    norms: Array.from({ length: K }, () => new RunningNorm(cfg.obsDim)),
  };
}

function normalizedObs(trainer: Trainer, msg: ObsMsg): Float64Array[] {
  const K = trainer.sac.cfg.K;
  const out: Float64Array[] = new Array(K);
  for (const agent of msg.agents) {
    const raw = flattenObs(agent.xi);
    trainer.norms[agent.k].update(raw);
    out[agent.k] = trainer.norms[agent.k].apply(raw);
  }
  return out;
}

/** One episode of interaction; transitions land in the buffer. Returns
 * the per-agent episode reward sums. */
export async function collectEpisode(
  trainer: Trainer,
  client: EnvClient,
  seed: number,
  explore = true,
): Promise<Float64Array> {
  const { K, Nr, Ns, N_nRT } = client.hello;
  const sums = new Float64Array(K);
  let msg = await client.reset(seed);
  let obs = normalizedObs(trainer, msg);
  for (let n = 0; n < N_nRT; n++) {
    const actions = trainer.sac.agents.map((ag, k) =>
      explore ? ag.policy.sample(obs[k], trainer.sac.rng).action : ag.policy.act(obs[k]),
    );
    for (let k = 0; k < K; k++) {
      if (!validAction(actions[k], Nr, Ns)) throw new Error(`invalid sampled action for agent ${k}`);
    }
    const payloads = actions.map((a, k) => encodeAction(k, a, Nr, Ns));
    const { reward, obs: nextMsg } = await client.act(msg.n, payloads);
    const nextObs = normalizedObs(trainer, nextMsg);
    const r = new Float64Array(K);
    for (const entry of reward.agents) {
      r[entry.k] = entry.r;
      sums[entry.k] += entry.r;
    }
    trainer.buffer.push({ obs, nextObs, act: actions, reward: r } satisfies Transition);
    msg = nextMsg;
    obs = nextObs;
  }
  return sums;
}

export async function main(argv: string[]): Promise<void> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) args.set(argv[i], argv[i + 1]);
  const config = args.get("--config");
  if (!config) throw new Error("usage: train --config scenario.json [--episodes N] [--opt-steps M]");
  const episodes = Number(args.get("--episodes") ?? 20);
  const optSteps = Number(args.get("--opt-steps") ?? 40);
  const python = args.get("--python") ?? "python3";

  const client = await EnvClient.spawn(config, python);
  const trainer = makeTrainer(client, { batch: 64 });
  for (let ep = 0; ep < episodes; ep++) {
    const sums = await collectEpisode(trainer, client, 1000 + ep);
    let stats = { criticLoss: 0, actorLoss: 0, alphaMean: 0, entropyEstimate: 0 };
    if (trainer.buffer.size >= 8) {
      for (let s = 0; s < optSteps; s++) stats = trainer.sac.step(trainer.buffer);
    }
    console.log(
      `episode ${ep}: mean reward ${mean(sums as unknown as number[]).toFixed(4)} ` +
        `criticLoss ${stats.criticLoss.toFixed(4)} alpha ${stats.alphaMean.toFixed(4)}`,
    );
  }
  await client.bye();
}

const isMain = process.argv[1]?.endsWith("train.js");
if (isMain) {
  main(process.argv.slice(2)).catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
