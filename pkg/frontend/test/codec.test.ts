import { describe, expect, it } from "vitest";

import { actDim, decodeAction, encodeAction, flattenObs, obsDim, validAction } from "../src/codec.js";
import { Rng } from "../src/math.js";
import { Policy } from "../src/policy.js";

describe("codec", () => {
  it("matches the wire dimension formulas", () => {
    expect(obsDim(2, 2, 6)).toBe(48);
    expect(actDim(2, 2)).toBe(12);
  });

  it("round-trips action vectors bit-exactly", () => {
    const rng = new Rng(1);
    const nr = 2;
    const ns = 2;
    const vec = new Float64Array(actDim(nr, ns));
    for (let i = 0; i < vec.length; i++) vec[i] = rng.uniform(-2, 2);
    vec[0] = Math.abs(vec[0]) + 0.1;
    vec[1] = Math.abs(vec[1]) + 0.1;
    const payload = encodeAction(3, vec, nr, ns);
    expect(payload.k).toBe(3);
    expect(payload.tril_L.length).toBe(4);
    expect(payload.U.length).toBe(4);
    const back = decodeAction(payload, nr, ns);
    expect(Array.from(back)).toEqual(Array.from(vec));
  });

  it("flattens observation pairs in order", () => {
    const flat = flattenObs([
      [1, 2],
      [3, 4],
    ]);
    expect(Array.from(flat)).toEqual([1, 2, 3, 4]);
  });

  it("rejects non-positive diagonals and bad lengths", () => {
    const nr = 2;
    const ns = 2;
    const vec = new Float64Array(actDim(nr, ns)).fill(0.5);
    vec[0] = 0;
    expect(validAction(vec, nr, ns)).toBe(false);
    expect(validAction(new Float64Array(3), nr, ns)).toBe(false);
    vec[0] = 1;
    vec[3] = Number.NaN;
    expect(validAction(vec, nr, ns)).toBe(false);
  });

  it("samples 10^4 policy actions, all valid", () => {
    const rng = new Rng(7);
    const nr = 2;
    const ns = 2;
    const policy = new Policy(obsDim(nr, ns, 4), actDim(nr, ns), ns, 2.0, [16], rng);
    const obs = new Float64Array(policy.obsDim);
    let valid = 0;
    const total = 10_000;
    for (let i = 0; i < total; i++) {
      for (let d = 0; d < obs.length; d++) obs[d] = rng.uniform(-3, 3);
      const s = policy.sample(obs, rng);
      if (validAction(s.action, nr, ns)) valid += 1;
      // the squash must respect the bounds too
      for (let d = ns; d < s.action.length; d++) {
        expect(Math.abs(s.action[d])).toBeLessThanOrEqual(2.0);
      }
    }
    expect(valid).toBe(total);
  });
});
