/**
 * Trainer tests.  The heavyweight case trains the reference C4D3U32
 * architecture on the committed synthetic splits and checks detection
 * quality plus byte-exact interchange with the fault-injection runner.
 */

import { spawnSync } from "node:child_process";
import { createHash } from "node:crypto";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

import { readDatasetCsv, selectLabel } from "../src/dataset.js";
import { RandomStream } from "../src/rng.js";
import {
  fitFlow,
  linearPercentile,
  TrainConfigError,
  TrainDivergenceError,
  trainModel,
  TrainSpec,
  validateSpec,
} from "../src/train.js";
import { loadFlow, parseWeights } from "../src/weights.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.join(HERE, "..", "..", "data", "fixtures");

const BASE: TrainSpec = {
  inputDim: 8,
  nCoupling: 4,
  fcDepth: 3,
  units: 32,
  learningRate: 1e-3,
  epochs: 60,
  batchSize: 64,
  seed: 77,
  dataDir: FIXTURES,
  thresholdPercentile: 5,
};

const sha256 = (b: Uint8Array) => createHash("sha256").update(b).digest("hex");

function gaussRows(n: number, dim: number, seed: bigint): Float64Array[] {
  const s = new RandomStream(seed);
  return Array.from({ length: n }, () => Float64Array.from({ length: dim }, () => s.gauss32()));
}

describe("linearPercentile", () => {
  it("interpolates like the runner's threshold calibration", () => {
    expect(linearPercentile([1, 2, 3, 4], 0)).toBe(1);
    expect(linearPercentile([1, 2, 3, 4], 100)).toBe(4);
    expect(linearPercentile([1, 2, 3, 4], 50)).toBe(2.5);
    expect(linearPercentile([1, 2, 3, 4], 25)).toBe(1.75);
    expect(linearPercentile([7], 13)).toBe(7);
  });

  it("ignores input order", () => {
    expect(linearPercentile([4, 1, 3, 2], 25)).toBe(1.75);
  });

  it("rejects empty input", () => {
    expect(() => linearPercentile([], 50)).toThrow(RangeError);
  });
});

describe("validateSpec", () => {
  it("accepts the reference recipe", () => {
    expect(() => validateSpec(BASE)).not.toThrow();
  });

  it("rejects bad hyperparameters with TrainConfigError", () => {
    expect(() => validateSpec({ ...BASE, learningRate: 0 })).toThrow(TrainConfigError);
    expect(() => validateSpec({ ...BASE, epochs: 2.5 })).toThrow(/integers/);
    expect(() => validateSpec({ ...BASE, batchSize: -4 })).toThrow(/batchSize/);
    expect(() => validateSpec({ ...BASE, seed: -1 })).toThrow(/seed/);
    expect(() => validateSpec({ ...BASE, thresholdPercentile: 0 })).toThrow(/\(0, 100\)/);
    expect(() => validateSpec({ ...BASE, thresholdPercentile: 100 })).toThrow(TrainConfigError);
  });

  it("rejects bad architectures too", () => {
    expect(() => validateSpec({ ...BASE, inputDim: 7 })).toThrow(RangeError);
  });
});

describe("fitFlow", () => {
  it("drives the loss down on easy data", () => {
    const spec: TrainSpec = { ...BASE, nCoupling: 2, fcDepth: 2, units: 8, epochs: 5 };
    const rows = selectLabel(readDatasetCsv(path.join(FIXTURES, "train.csv")), 0);
    const { history } = fitFlow(spec, rows);
    expect(history).toHaveLength(5);
    expect(history[4]).toBeLessThan(history[0]);
  });

  it("aborts with a diagnostic when the loss blows up", () => {
    const spec: TrainSpec = {
      ...BASE,
      inputDim: 4,
      nCoupling: 2,
      fcDepth: 3,
      units: 4,
      learningRate: 1e30,
      epochs: 2,
      batchSize: 4,
      seed: 5,
    };
    const rows = gaussRows(16, 4, 9n);
    expect(() => fitFlow(spec, rows)).toThrow(TrainDivergenceError);
    expect(() => fitFlow(spec, rows)).toThrow(/epoch 0, batch 1/);
  });

  it("refuses empty and mis-sized training sets", () => {
    expect(() => fitFlow({ ...BASE, epochs: 1 }, [])).toThrow(TrainConfigError);
    expect(() => fitFlow({ ...BASE, epochs: 1 }, gaussRows(4, 6, 1n))).toThrow(/input_dim/);
  });
});

describe("trainModel input handling", () => {
  it("treats a missing dataset file as a runtime error, not a config error", () => {
    const empty = fs.mkdtempSync(path.join(os.tmpdir(), "nodata-"));
    try {
      expect(() => trainModel({ ...BASE, dataDir: empty, epochs: 1 })).toThrow(/not found/);
      expect(() => trainModel({ ...BASE, dataDir: empty, epochs: 1 })).not.toThrow(TrainConfigError);
    } finally {
      fs.rmSync(empty, { recursive: true, force: true });
    }
  });
});

describe("reference training run", () => {
  let bytes: Uint8Array;
  let threshold: number;
  let history: number[];

  beforeAll(() => {
    const out = trainModel(BASE);
    bytes = out.bytes;
    threshold = out.threshold;
    history = out.history;
  });

  it("converges", () => {
    expect(history).toHaveLength(60);
    expect(history[59]).toBeLessThan(history[0]);
  });

  it("stores the calibrated threshold in the file", () => {
    const parsed = parseWeights(bytes);
    expect(parsed.threshold).toBe(threshold);
    expect(parsed.def).toEqual({ inputDim: 8, nCoupling: 4, fcDepth: 3, units: 32 });
  });

  it("recalls at least 90% of held-out anomalies at the 5% FPR threshold", () => {
    const flow = loadFlow(parseWeights(bytes));
    const test = readDatasetCsv(path.join(FIXTURES, "test.csv"));
    const anomalous = flow.logProbRows(selectLabel(test, 1));
    const nominal = flow.logProbRows(selectLabel(test, 0));
    const recall = anomalous.filter((lp) => lp < threshold).length / anomalous.length;
    expect(recall).toBeGreaterThanOrEqual(0.9);
    // sanity on the false-positive side: nowhere near total collapse
    const fpr = nominal.filter((lp) => lp < threshold).length / nominal.length;
    expect(fpr).toBeLessThan(0.2);
  });

  it("separates the class means on held-out data", () => {
    const flow = loadFlow(parseWeights(bytes));
    const test = readDatasetCsv(path.join(FIXTURES, "test.csv"));
    const mean = (v: number[]) => v.reduce((a, b) => a + b, 0) / v.length;
    const nominal = mean(flow.logProbRows(selectLabel(test, 0)));
    const anomalous = mean(flow.logProbRows(selectLabel(test, 1)));
    expect(nominal).toBeGreaterThan(anomalous);
  });

  it("loads byte-exactly in the fault-injection runner", () => {
    const tmp = path.join(os.tmpdir(), `trained-${process.pid}.rnvp`);
    fs.writeFileSync(tmp, bytes);
    try {
      const script = [
        "import hashlib, sys",
        "from flowfi.modelio import load_model, save_model_bytes",
        "m = load_model(sys.argv[1])",
        "assert m.threshold is not None",
        "print(hashlib.sha256(save_model_bytes(m)).hexdigest())",
      ].join("\n");
      const run = spawnSync("python3", ["-c", script, tmp], { encoding: "utf8" });
      expect(run.status, run.stderr).toBe(0);
      expect(run.stdout.trim()).toBe(sha256(bytes));
    } finally {
      fs.rmSync(tmp, { force: true });
    }
  });
});

describe("split sensitivity", () => {
  it("trains three distinct models from three generated datasets", () => {
    const root = fs.mkdtempSync(path.join(os.tmpdir(), "splits-"));
    try {
      const hashes = new Set<string>();
      for (const seed of [11, 12, 13]) {
        const dir = path.join(root, `s${seed}`);
        const gen = spawnSync(
          "python3",
          ["-m", "flowfi", "gen-data", "--out-dir", dir, "--seed", String(seed)],
          { encoding: "utf8" },
        );
        expect(gen.status, gen.stderr).toBe(0);
        const { bytes } = trainModel({ ...BASE, dataDir: dir, epochs: 2 });
        hashes.add(sha256(bytes));
      }
      expect(hashes.size).toBe(3);
    } finally {
      fs.rmSync(root, { recursive: true, force: true });
    }
  });
});
