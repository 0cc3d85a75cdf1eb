/** FIFO experience replay over joint transitions, uniform sampling. */

import { Rng } from "./math.js";

export interface Transition {
  obs: Float64Array[]; // per agent
  nextObs: Float64Array[];
  act: Float64Array[]; // per agent, flat action vectors
  reward: Float64Array; // per agent
}

export class ReplayBuffer {
  private readonly data: Transition[] = [];
  private head = 0;

  constructor(public readonly capacity: number) {}

  get size(): number {
    return this.data.length;
  }

  push(tr: Transition): void {
    if (this.data.length < this.capacity) {
      this.data.push(tr);
    } else {
      this.data[this.head] = tr;
      this.head = (this.head + 1) % this.capacity;
    }
  }

  sample(batch: number, rng: Rng): Transition[] {
    const out: Transition[] = [];
    for (let i = 0; i < batch; i++) out.push(this.data[rng.int(this.data.length)]);
    return out;
  }

  get(i: number): Transition {
    return this.data[i];
  }
}
