/**
 * Maximum-likelihood trainer: Adam on the mean negative log-likelihood
 * of nominal training windows, threshold calibrated on the validation
 * split, weights exported in the shared binary32 format.
 */

import fs from "node:fs";
import path from "node:path";

import { Dataset, readDatasetCsv, selectLabel } from "./dataset.js";
import { Flow, ModelDef, validateDef } from "./flow.js";
import { argsortKeys, deriveStream, fnv1a64 } from "./rng.js";
import { serializeFlow } from "./weights.js";

export interface TrainSpec {
  inputDim: number;
  nCoupling: number;
  fcDepth: number;
  units: number;
  learningRate: number;
  epochs: number;
  batchSize: number;
  seed: number;
  /** Directory holding train.csv and val.csv. */
  dataDir: string;
  /** Validation log_prob percentile that becomes the decision threshold. */
  thresholdPercentile: number;
}

export const DEFAULT_THRESHOLD_PERCENTILE = 5;

export class TrainConfigError extends Error {}
export class TrainDivergenceError extends Error {}

export function validateSpec(spec: TrainSpec): void {
  validateDef(spec);
  const positive: Array<[string, number]> = [
    ["learningRate", spec.learningRate],
    ["epochs", spec.epochs],
    ["batchSize", spec.batchSize],
  ];
  for (const [name, v] of positive) {
    if (!(v > 0)) throw new TrainConfigError(`${name} must be positive, got ${v}`);
  }
  if (!Number.isInteger(spec.epochs) || !Number.isInteger(spec.batchSize)) {
    throw new TrainConfigError("epochs and batchSize must be integers");
  }
  if (!Number.isInteger(spec.seed) || spec.seed < 0) {
    throw new TrainConfigError(`seed must be a non-negative integer, got ${spec.seed}`);
  }
  if (!(spec.thresholdPercentile > 0 && spec.thresholdPercentile < 100)) {
    throw new TrainConfigError(
      `thresholdPercentile must be in (0, 100), got ${spec.thresholdPercentile}`,
    );
  }
}

/** numpy-style linear-interpolation percentile of unsorted values. */
export function linearPercentile(values: number[], pct: number): number {
  if (values.length === 0) throw new RangeError("percentile of empty list");
  const v = [...values].sort((a, b) => a - b);
  const rank = (pct / 100) * (v.length - 1);
  const lo = Math.floor(rank);
  const hi = Math.min(lo + 1, v.length - 1);
  return v[lo] + (rank - lo) * (v[hi] - v[lo]);
}

export class Adam {
  private readonly lr: number;
  private readonly b1 = 0.9;
  private readonly b2 = 0.999;
  private readonly eps = 1e-8;
  private readonly m: Float64Array[];
  private readonly v: Float64Array[];
  private t = 0;

  constructor(params: Float64Array[], lr: number) {
    this.lr = lr;
    this.m = params.map((p) => new Float64Array(p.length));
    this.v = params.map((p) => new Float64Array(p.length));
  }

  step(params: Float64Array[], grads: Float64Array[]): void {
    this.t += 1;
    const c1 = 1 - this.b1 ** this.t;
    const c2 = 1 - this.b2 ** this.t;
    for (let i = 0; i < params.length; i++) {
      const p = params[i];
      const g = grads[i];
      const m = this.m[i];
      const v = this.v[i];
      for (let k = 0; k < p.length; k++) {
        m[k] = this.b1 * m[k] + (1 - this.b1) * g[k];
        v[k] = this.b2 * v[k] + (1 - this.b2) * g[k] * g[k];
        p[k] -= (this.lr * (m[k] / c1)) / (Math.sqrt(v[k] / c2) + this.eps);
      }
    }
  }
}

export interface FitResult {
  flow: Flow;
  history: number[]; // mean train loss per epoch
}

/** Fit a flow to the given nominal windows. Throws on non-finite loss. */
export function fitFlow(
  spec: TrainSpec,
  xTrain: Float64Array[],
  log?: (epoch: number, loss: number) => void,
): FitResult {
  validateSpec(spec);
  if (xTrain.length === 0) throw new TrainConfigError("no nominal training windows");
  if (xTrain[0].length !== spec.inputDim) {
    throw new TrainConfigError(
      `dataset dimension ${xTrain[0].length} does not match input_dim ${spec.inputDim}`,
    );
  }
  const flow = new Flow(spec, BigInt(spec.seed));
  const params = flow.params();
  const opt = new Adam(params, spec.learningRate);
  const shuffle = deriveStream(BigInt(spec.seed), [fnv1a64("shuffle")]);
  const n = xTrain.length;
  const history: number[] = [];
  for (let epoch = 0; epoch < spec.epochs; epoch++) {
    const order = argsortKeys(shuffle.raw(n));
    let total = 0;
    let batches = 0;
    for (let lo = 0; lo < n; lo += spec.batchSize) {
      const batch = order.slice(lo, lo + spec.batchSize).map((i) => xTrain[i]);
      const loss = flow.lossAndGrad(batch);
      if (!Number.isFinite(loss)) {
        throw new TrainDivergenceError(
          `training diverged: non-finite loss at epoch ${epoch}, batch ${batches} ` +
            `(lr=${spec.learningRate}); lower the learning rate or check the data`,
        );
      }
      opt.step(params, flow.grads());
      total += loss;
      batches += 1;
    }
    history.push(total / batches);
    log?.(epoch, total / batches);
  }
  return { flow, history };
}

/** Round every parameter to binary32 in place (export semantics). */
export function truncateToBinary32(flow: Flow): void {
  for (const p of flow.params()) {
    for (let k = 0; k < p.length; k++) p[k] = Math.fround(p[k]);
  }
}

export interface TrainOutput {
  bytes: Uint8Array;
  threshold: number;
  history: number[];
  def: ModelDef;
}

/**
 * Full training pipeline: fit on nominal train rows, truncate to
 * binary32, set the threshold at the spec percentile of validation
 * log_prob, serialize.
 */
export function trainModel(spec: TrainSpec, log?: (epoch: number, loss: number) => void): TrainOutput {
  validateSpec(spec);
  const trainPath = path.join(spec.dataDir, "train.csv");
  const valPath = path.join(spec.dataDir, "val.csv");
  for (const p of [trainPath, valPath]) {
    // a missing file is a runtime failure, not a spec mistake
    if (!fs.existsSync(p)) throw new Error(`dataset file not found: ${p}`);
  }
  const trainDs = readDatasetCsv(trainPath);
  const valDs: Dataset = readDatasetCsv(valPath);

  const { flow, history } = fitFlow(spec, selectLabel(trainDs, 0), log);

  truncateToBinary32(flow);
  for (const p of flow.params()) {
    for (let k = 0; k < p.length; k++) {
      if (!Number.isFinite(p[k])) {
        throw new TrainDivergenceError("trained weights contain non-finite values; refusing to export");
      }
    }
  }

  const valNominal = selectLabel(valDs, 0);
  if (valNominal.length === 0) throw new TrainConfigError("validation split has no nominal rows");
  const valLp = flow.logProbRows(valNominal);
  const threshold = Math.fround(linearPercentile(valLp, spec.thresholdPercentile));

  const def: ModelDef = {
    inputDim: spec.inputDim,
    nCoupling: spec.nCoupling,
    fcDepth: spec.fcDepth,
    units: spec.units,
  };
  return { bytes: serializeFlow(flow, threshold), threshold, history, def };
}
