/** Power-multiplier surrogate: train a small regressor on the bisection
 * table and export it in the portable model format the simulator loads.
 * Feature/target standardization is folded into the first/last layers on
 * export, so the file operates on raw [phi..., lambda..., pmax] inputs. */

import * as fs from "node:fs";

import { Adam, Rng, zeros } from "./math.js";
import { Mlp, mlp } from "./mlp.js";

export interface XiDataset {
  features: Float64Array[]; // [phi..., lambda..., pmax]
  targets: Float64Array;
  nt: number;
}

export function readXiCsv(path: string): XiDataset {
  const lines = fs.readFileSync(path, "utf-8").trim().split("\n").map((l) => l.replace(/\r$/, ""));
  const header = lines[0].split(",");
  const nt = (header.length - 2) / 2;
  if (!Number.isInteger(nt) || header[header.length - 1] !== "xi") {
    throw new Error(`not a xi dataset: header ${header}`);
  }
  const features: Float64Array[] = [];
  const targets = zeros(lines.length - 1);
  for (let r = 1; r < lines.length; r++) {
    const cells = lines[r].split(",").map(Number);
    features.push(Float64Array.from(cells.slice(0, 2 * nt + 1)));
    targets[r - 1] = cells[2 * nt + 1];
  }
  return { features, targets, nt };
}

export interface ModelLayer {
  rows: number;
  cols: number;
  weights: number[];
  bias: number[];
  activation: "relu" | "linear";
}

export interface XiModel {
  layers: ModelLayer[];
}

export function forward(model: XiModel, x: ArrayLike<number>): number {
  let h: Float64Array = Float64Array.from(x as ArrayLike<number>);
  for (const layer of model.layers) {
    const out = zeros(layer.rows);
    for (let o = 0; o < layer.rows; o++) {
      let s = layer.bias[o];
      for (let i = 0; i < layer.cols; i++) s += layer.weights[o * layer.cols + i] * h[i];
      out[o] = layer.activation === "relu" && s < 0 ? 0 : s;
    }
    h = out;
  }
  return Math.max(0, h[0]);
}

interface Standardizer {
  mean: Float64Array;
  std: Float64Array;
}

function fitStandardizer(rows: Float64Array[]): Standardizer {
  const dim = rows[0].length;
  const mean = zeros(dim);
  const std = zeros(dim);
  for (const r of rows) for (let i = 0; i < dim; i++) mean[i] += r[i];
  for (let i = 0; i < dim; i++) mean[i] /= rows.length;
  for (const r of rows) for (let i = 0; i < dim; i++) std[i] += (r[i] - mean[i]) ** 2;
  for (let i = 0; i < dim; i++) std[i] = Math.sqrt(std[i] / rows.length) + 1e-12;
  return { mean, std };
}

export interface TrainOptions {
  hidden: number[];
  epochs: number;
  batch: number;
  lr: number;
  seed: number;
  holdoutFraction: number;
}

export const defaultTrain: TrainOptions = {
  hidden: [64, 64],
  epochs: 400,
  batch: 128,
  lr: 1e-3,
  seed: 1,
  holdoutFraction: 0.2,
};

export interface TrainResult {
  model: XiModel;
  holdoutMedianRelError: number;
  net: Mlp;
}

/** Median of |pred - target| / target over rows with target > floor. */
export function medianRelError(model: XiModel, feats: Float64Array[], targets: Float64Array): number {
  const errs: number[] = [];
  for (let i = 0; i < feats.length; i++) {
    if (targets[i] > 1e-9) {
      errs.push(Math.abs(forward(model, feats[i]) - targets[i]) / targets[i]);
    }
  }
  errs.sort((a, b) => a - b);
  if (errs.length === 0) return 0;
  return errs[Math.floor(errs.length / 2)];
}

export function trainXiSurrogate(data: XiDataset, opts: TrainOptions = defaultTrain): TrainResult {
  const rng = new Rng(opts.seed);
  const n = data.features.length;
  const idx = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = rng.int(i + 1);
    [idx[i], idx[j]] = [idx[j], idx[i]];
  }
  const holdN = Math.max(1, Math.floor(n * opts.holdoutFraction));
  const trainIdx = idx.slice(holdN);
  const holdIdx = idx.slice(0, holdN);

  const xStd = fitStandardizer(trainIdx.map((i) => data.features[i]));
  const yRows = trainIdx.map((i) => Float64Array.of(data.targets[i]));
  const yStd = fitStandardizer(yRows);

  const dim = data.features[0].length;
  const net = mlp([dim, ...opts.hidden, 1], "relu", rng);
  const opt = new Adam(net.size, opts.lr);
  const grads = zeros(net.size);

  const xs = trainIdx.map((i) => {
    const out = zeros(dim);
    for (let d = 0; d < dim; d++) out[d] = (data.features[i][d] - xStd.mean[d]) / xStd.std[d];
    return out;
  });
  const ys = trainIdx.map((i) => (data.targets[i] - yStd.mean[0]) / yStd.std[0]);

  for (let epoch = 0; epoch < opts.epochs; epoch++) {
    for (let start = 0; start < xs.length; start += opts.batch) {
      const stop = Math.min(start + opts.batch, xs.length);
      grads.fill(0);
      for (let b = start; b < stop; b++) {
        const { out, acts } = net.forward(xs[b]);
        const err = out[0] - ys[b];
        net.backward(acts, Float64Array.of(err / (stop - start)), grads);
      }
      opt.step(net.params, grads);
    }
  }

  const model = exportModel(net, xStd, yStd);
  const holdFeats = holdIdx.map((i) => data.features[i]);
  const holdTargets = Float64Array.from(holdIdx.map((i) => data.targets[i]));
  return {
    model,
    net,
    holdoutMedianRelError: medianRelError(model, holdFeats, holdTargets),
  };
}

/** Fold x-standardization into layer 0 and y-destandardization into the
 * last layer, producing a raw-input model in the portable format. */
export function exportModel(net: Mlp, xStd: Standardizer, yStd: Standardizer): XiModel {
  const layers: ModelLayer[] = [];
  for (let li = 0; li < net.layers.length; li++) {
    const spec = net.layers[li];
    const { weights, bias } = net.layerWeights(li);
    const w = Array.from(weights);
    const b = Array.from(bias);
    if (li === 0) {
      for (let o = 0; o < spec.outDim; o++) {
        let shift = 0;
        for (let i = 0; i < spec.inDim; i++) {
          const scaled = w[o * spec.inDim + i] / xStd.std[i];
          shift += scaled * xStd.mean[i];
          w[o * spec.inDim + i] = scaled;
        }
        b[o] -= shift;
      }
    }
    if (li === net.layers.length - 1) {
      for (let o = 0; o < spec.outDim; o++) {
        for (let i = 0; i < spec.inDim; i++) w[o * spec.inDim + i] *= yStd.std[0];
        b[o] = b[o] * yStd.std[0] + yStd.mean[0];
      }
    }
    layers.push({
      rows: spec.outDim,
      cols: spec.inDim,
      weights: w,
      bias: b,
      activation: spec.activation,
    });
  }
  return { layers };
}

export function saveModel(model: XiModel, path: string): void {
  fs.writeFileSync(path, JSON.stringify(model));
}

export function loadModel(path: string): XiModel {
  return JSON.parse(fs.readFileSync(path, "utf-8")) as XiModel;
}
