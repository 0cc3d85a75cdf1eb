import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { Rng } from "../src/math.js";
import {
  XiDataset,
  defaultTrain,
  forward,
  loadModel,
  medianRelError,
  readXiCsv,
  saveModel,
  trainXiSurrogate,
} from "../src/xi.js";

const PYTHON = process.env.CFMIMO_PYTHON ?? "python3";

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "cfmimo-xi-"));
}

function analyticNt1Dataset(n: number, seed: number): XiDataset {
  // closed-form family: xi = max(0, sqrt(phi/pmax) - lambda)
  const rng = new Rng(seed);
  const features: Float64Array[] = [];
  const targets = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    const phi = Math.pow(10, rng.uniform(0, 2));
    const lam = Math.pow(10, rng.uniform(-2, 0));
    const pmax = Math.pow(10, rng.uniform(-0.3, 0.3));
    features.push(Float64Array.of(phi, lam, pmax));
    targets[i] = Math.max(0, Math.sqrt(phi / pmax) - lam);
  }
  return { features, targets, nt: 1 };
}

describe("xi surrogate", () => {
  it("fits the Nt=1 analytic family below 5 percent held-out error", () => {
    const data = analyticNt1Dataset(3000, 1);
    const result = trainXiSurrogate(data, { ...defaultTrain, epochs: 300, seed: 2 });
    expect(result.holdoutMedianRelError).toBeLessThan(0.05);
  });

  it("constant-target dataset is reproduced within 1e-3", () => {
    const rng = new Rng(3);
    const features: Float64Array[] = [];
    const targets = new Float64Array(400).fill(1.7);
    for (let i = 0; i < 400; i++) {
      features.push(Float64Array.of(rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(0.5, 2)));
    }
    const result = trainXiSurrogate(
      { features, targets, nt: 1 },
      { ...defaultTrain, epochs: 200, seed: 4 },
    );
    for (let i = 0; i < 10; i++) {
      expect(Math.abs(forward(result.model, features[i]) - 1.7)).toBeLessThan(1e-3);
    }
  });

  it("trains on the generator's table below 5 percent and round-trips through the simulator", () => {
    const dir = tmpdir();
    const csv = path.join(dir, "xi.csv");
    // moderate ranges keep the roots in a learnable band
    execFileSync(PYTHON, [
      "-c",
      [
        "from cfmimo import precoder",
        "rows = precoder.xi_dataset_gen(4000, 2, seed=5, phi_range=(1e0, 1e2), lam_range=(1e-1, 1e1), pmax_range=(0.5, 2.0))",
        `precoder.write_xi_dataset(r'${csv}', rows, 2)`,
      ].join("\n"),
    ]);
    const data = readXiCsv(csv);
    expect(data.nt).toBe(2);
    expect(data.features.length).toBe(4000);

    const result = trainXiSurrogate(data, { ...defaultTrain, epochs: 350, seed: 6 });
    expect(result.holdoutMedianRelError).toBeLessThan(0.05);

    // cross-component parity: the exported file must evaluate identically
    // (within 1e-6) through the simulator's loader
    const modelPath = path.join(dir, "model.json");
    saveModel(result.model, modelPath);
    const probe = data.features.slice(0, 50);
    const tsOut = probe.map((f) => forward(result.model, f));
    const pyScript = [
      "import json, sys",
      "import numpy as np",
      "from cfmimo import precoder",
      `X = np.array(json.loads(sys.argv[1]))`,
      `out = precoder.xi_approx_eval(r'${modelPath}', X)`,
      "print(json.dumps(list(map(float, out))))",
    ].join("\n");
    const pyOut = JSON.parse(
      execFileSync(PYTHON, ["-c", pyScript, JSON.stringify(probe.map((f) => Array.from(f)))], {
        encoding: "utf-8",
      }),
    ) as number[];
    for (let i = 0; i < probe.length; i++) {
      expect(Math.abs(tsOut[i] - pyOut[i])).toBeLessThan(1e-6 * Math.max(1, Math.abs(tsOut[i])));
    }

    // and the loaded model matches the in-memory one
    const reloaded = loadModel(modelPath);
    expect(forward(reloaded, data.features[0])).toBe(forward(result.model, data.features[0]));
  });

  it("median metric ignores zero-root rows", () => {
    const data = analyticNt1Dataset(100, 9);
    const model = trainXiSurrogate(data, { ...defaultTrain, epochs: 50, seed: 10 }).model;
    // inject rows whose target is zero; they must not poison the metric
    const feats = [...data.features, Float64Array.of(1, 100, 1)];
    const targets = Float64Array.from([...data.targets, 0]);
    expect(Number.isFinite(medianRelError(model, feats, targets))).toBe(true);
  });
});
