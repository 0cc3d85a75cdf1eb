/** JSON-lines client for the environment bridge, over a spawned
 * `cfmimo serve-env --stdio` child process. */

import { ChildProcess, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";

import { ActPayload, Dims } from "./codec.js";

export interface ObsMsg {
  type: "obs";
  n: number;
  agents: { k: number; xi: number[][] }[];
}

export interface RewardMsg {
  type: "reward";
  n: number;
  agents: { k: number; r: number }[];
}

type Msg = Record<string, unknown>;

export class EnvClient {
  private queue: Msg[] = [];
  private waiters: ((m: Msg) => void)[] = [];
  private closed = false;
  hello!: Dims;

  private constructor(
    private readonly proc: ChildProcess,
    private readonly lines: Interface,
  ) {
    lines.on("line", (line) => {
      let msg: Msg;
      try {
        msg = JSON.parse(line);
      } catch {
        return;
      }
      const waiter = this.waiters.shift();
      if (waiter) waiter(msg);
      else this.queue.push(msg);
    });
    lines.on("close", () => {
      this.closed = true;
      const waiter = this.waiters.shift();
      if (waiter) waiter({ type: "__closed__" });
    });
  }

  static async spawn(configPath: string, python = "python3"): Promise<EnvClient> {
    const proc = spawn(python, ["-m", "cfmimo.cli", "serve-env", "--config", configPath, "--stdio"], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const client = new EnvClient(proc, createInterface({ input: proc.stdout! }));
    const hello = (await client.recv()) as { type: string; scenario: Dims };
    if (hello.type !== "hello") throw new Error(`expected hello, got ${JSON.stringify(hello)}`);
    client.hello = hello.scenario;
    return client;
  }

  send(obj: unknown): void {
    this.proc.stdin!.write(JSON.stringify(obj) + "\n");
  }

  recv(): Promise<Msg> {
    if (this.queue.length > 0) return Promise.resolve(this.queue.shift()!);
    if (this.closed) return Promise.resolve({ type: "__closed__" });
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  async reset(seed: number): Promise<ObsMsg> {
    this.send({ type: "reset", seed });
    const msg = await this.recv();
    if (msg.type !== "obs") throw new Error(`expected obs after reset, got ${msg.type}`);
    return msg as unknown as ObsMsg;
  }

  /** Answer obs n; returns the reward for n and the following obs. */
  async act(n: number, agents: ActPayload[]): Promise<{ reward: RewardMsg; obs: ObsMsg }> {
    this.send({ type: "act", n, agents });
    let reward: RewardMsg | null = null;
    let obs: ObsMsg | null = null;
    while (!reward || !obs) {
      const msg = await this.recv();
      if (msg.type === "reward") reward = msg as unknown as RewardMsg;
      else if (msg.type === "obs") obs = msg as unknown as ObsMsg;
      else if (msg.type === "error") throw new Error(`bridge error: ${JSON.stringify(msg)}`);
      else if (msg.type === "__closed__") throw new Error("bridge closed");
    }
    return { reward, obs };
  }

  async bye(): Promise<void> {
    this.send({ type: "bye" });
    await this.recv();
    this.proc.stdin!.end();
    await new Promise((resolve) => this.proc.on("exit", resolve));
  }

  kill(): void {
    this.proc.kill();
  }
}
