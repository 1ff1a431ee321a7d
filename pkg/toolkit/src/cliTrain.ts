#!/usr/bin/env node
/**
 * train: fit a Real NVP anomaly detector on a dataset directory and
 * export the weights file.
 *
 * Flags mirror the training spec fields; exit 2 on configuration
 * errors, 1 on runtime failures such as divergence or missing files.
 */

import fs from "node:fs";
import { parseArgs } from "node:util";

import { DEFAULT_THRESHOLD_PERCENTILE, TrainConfigError, TrainSpec, trainModel } from "./train.js";

const HELP = `usage: train --data <dir> --out <weights-file> [options]

Fits by maximum likelihood on the nominal rows of <dir>/train.csv and
calibrates the decision threshold on <dir>/val.csv.

options (defaults in brackets):
  --input-dim N    window dimensionality [8]
  --n-coupling N   coupling layers [4]
  --fc-depth N     FC layers per net [3]
  --units N        hidden width [32]
  --lr X           Adam learning rate [0.001]
  --epochs N       training epochs [60]
  --batch N        minibatch size [64]
  --seed N         RNG seed [77]
  --percentile X   validation log_prob percentile for the threshold [${DEFAULT_THRESHOLD_PERCENTILE}]
  --quiet          suppress per-epoch progress
  --help           show this message
`;

function intFlag(raw: string | undefined, fallback: number, name: string): number {
  if (raw === undefined) return fallback;
  const v = Number(raw);
  if (!Number.isInteger(v)) throw new TrainConfigError(`--${name} must be an integer, got ${raw}`);
  return v;
}

function floatFlag(raw: string | undefined, fallback: number, name: string): number {
  if (raw === undefined) return fallback;
  const v = Number(raw);
  if (Number.isNaN(v)) throw new TrainConfigError(`--${name} must be a number, got ${raw}`);
  return v;
}

export function main(argv: string[]): number {
  let spec: TrainSpec;
  let outPath: string;
  let quiet: boolean;
  try {
    const { values } = parseArgs({
      args: argv,
      options: {
        "input-dim": { type: "string" },
        "n-coupling": { type: "string" },
        "fc-depth": { type: "string" },
        units: { type: "string" },
        lr: { type: "string" },
        epochs: { type: "string" },
        batch: { type: "string" },
        seed: { type: "string" },
        data: { type: "string" },
        percentile: { type: "string" },
        out: { type: "string" },
        quiet: { type: "boolean", default: false },
        help: { type: "boolean", default: false },
      },
    });
    if (values.help) {
      process.stdout.write(HELP);
      return 0;
    }
    if (!values.data || !values.out) {
      throw new TrainConfigError("--data and --out are required");
    }
    spec = {
      inputDim: intFlag(values["input-dim"], 8, "input-dim"),
      nCoupling: intFlag(values["n-coupling"], 4, "n-coupling"),
      fcDepth: intFlag(values["fc-depth"], 3, "fc-depth"),
      units: intFlag(values.units, 32, "units"),
      learningRate: floatFlag(values.lr, 1e-3, "lr"),
      epochs: intFlag(values.epochs, 60, "epochs"),
      batchSize: intFlag(values.batch, 64, "batch"),
      seed: intFlag(values.seed, 77, "seed"),
      dataDir: values.data,
      thresholdPercentile: floatFlag(values.percentile, DEFAULT_THRESHOLD_PERCENTILE, "percentile"),
    };
    outPath = values.out;
    quiet = values.quiet ?? false;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 2;
  }

  try {
    const log = quiet
      ? undefined
      : (epoch: number, loss: number) => {
          if (epoch % 10 === 0 || epoch === spec.epochs - 1) {
            process.stderr.write(`epoch ${epoch} mean nll ${loss.toFixed(4)}\n`);
          }
        };
    const result = trainModel(spec, log);
    fs.writeFileSync(outPath, result.bytes);
    process.stdout.write(
      `wrote ${outPath} (${result.bytes.length} bytes), ` +
        `threshold ${result.threshold}, final loss ${result.history[result.history.length - 1].toFixed(4)}\n`,
    );
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    // corrupt or missing files and divergence are runtime failures, not
    // caller mistakes: exit 1, matching the campaign runner's convention
    return err instanceof TrainConfigError ? 2 : 1;
  }
}

process.exit(main(process.argv.slice(2)));
