#!/usr/bin/env node
/**
 * Regenerates the committed fixture detector.
 *
 * The recipe is frozen so the artifact under data/fixtures/ can be
 * reproduced from the committed dataset CSVs:
 *   C4D3U32, lr 1e-3, 60 epochs, batch 64, seed 77,
 *   threshold at the 1st percentile of validation log_prob.
 *
 * The 1st percentile (not the default 5) keeps the corruption-response
 * margins of the trend tests comfortably away from their limits; the
 * runner's acceptance suite prints the measured rates.
 *
 * usage: make-fixture [dataDir] [outFile]   (defaults: data/fixtures/)
 */

import fs from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { trainModel } from "./train.js";

const FIXTURES = path.join(path.dirname(fileURLToPath(import.meta.url)), "..", "..", "data", "fixtures");
const dataDir = process.argv[2] ?? FIXTURES;
const outFile = process.argv[3] ?? path.join(FIXTURES, "c4d3u32.rnvp");

const result = trainModel(
  {
    inputDim: 8,
    nCoupling: 4,
    fcDepth: 3,
    units: 32,
    learningRate: 1e-3,
    epochs: 60,
    batchSize: 64,
    seed: 77,
    dataDir,
    thresholdPercentile: 1.0,
  },
  (epoch, loss) => {
    if (epoch % 10 === 0 || epoch === 59) {
      process.stderr.write(`epoch ${epoch} mean nll ${loss.toFixed(4)}\n`);
    }
  },
);

fs.writeFileSync(outFile, result.bytes);
process.stdout.write(`wrote ${outFile} (${result.bytes.length} bytes), threshold ${result.threshold}\n`);
