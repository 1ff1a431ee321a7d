/**
 * End-to-end tests of the two command-line entry points, run against the
 * compiled dist/ output: exit codes, error channels, and written files.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { parseWeights } from "../src/weights.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const TRAIN = path.join(HERE, "..", "dist", "cliTrain.js");
const PLOT = path.join(HERE, "..", "dist", "cliPlot.js");
const FIXTURES = path.join(HERE, "..", "..", "data", "fixtures");

function run(cli: string, ...args: string[]) {
  return spawnSync("node", [cli, ...args], { encoding: "utf8" });
}

describe("train CLI", () => {
  it("prints usage on --help", () => {
    const r = run(TRAIN, "--help");
    expect(r.status).toBe(0);
    expect(r.stdout).toContain("usage: train");
  });

  it("exits 2 without the required flags", () => {
    const r = run(TRAIN);
    expect(r.status).toBe(2);
    expect(r.stderr).toContain("--data and --out are required");
  });

  it("exits 2 on malformed and unknown flags", () => {
    expect(run(TRAIN, "--data", "x", "--out", "y", "--epochs", "ten").status).toBe(2);
    expect(run(TRAIN, "--data", "x", "--out", "y", "--frobnicate").status).toBe(2);
  });

  it("exits 2 on an invalid hyperparameter", () => {
    const r = run(TRAIN, "--data", FIXTURES, "--out", "/tmp/nope.rnvp", "--percentile", "0");
    expect(r.status).toBe(2);
    expect(r.stderr).toContain("thresholdPercentile");
  });

  it("exits 1 when the dataset directory has no splits", () => {
    const empty = fs.mkdtempSync(path.join(os.tmpdir(), "cli-nodata-"));
    try {
      const r = run(TRAIN, "--data", empty, "--out", path.join(empty, "w.rnvp"));
      expect(r.status).toBe(1);
      expect(r.stderr).toContain("not found");
    } finally {
      fs.rmSync(empty, { recursive: true, force: true });
    }
  });

  it("trains and writes a loadable weights file", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "cli-train-"));
    const out = path.join(dir, "tiny.rnvp");
    try {
      const r = run(
        TRAIN,
        "--data", FIXTURES, "--out", out, "--quiet",
        "--n-coupling", "2", "--fc-depth", "2", "--units", "8", "--epochs", "2",
      );
      expect(r.status, r.stderr).toBe(0);
      expect(r.stdout).toContain(`wrote ${out}`);
      const parsed = parseWeights(fs.readFileSync(out));
      expect(parsed.def).toEqual({ inputDim: 8, nCoupling: 2, fcDepth: 2, units: 8 });
      expect(parsed.threshold).not.toBeNull();
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });
});

describe("plot CLI", () => {
  const results = path.join(FIXTURES, "results.csv");

  it("prints usage on --help", () => {
    const r = run(PLOT, "--help");
    expect(r.status).toBe(0);
    expect(r.stdout).toContain("usage: plot");
  });

  it("exits 2 on missing flags and unknown kinds", () => {
    expect(run(PLOT).status).toBe(2);
    expect(run(PLOT, "--rows", results, "--kind", "pie", "--out", "/tmp/x.svg").status).toBe(2);
    expect(run(PLOT, "--rows", results, "--kind", "histogram", "--out", "/tmp/x.svg", "--bins", "1").status).toBe(2);
  });

  it("exits 2 with a column diff on a schema mismatch", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "cli-plot-"));
    const bad = path.join(dir, "bad.csv");
    const out = path.join(dir, "fig.svg");
    fs.writeFileSync(bad, "config_id,whatever\nx,y\n");
    try {
      const r = run(PLOT, "--rows", bad, "--kind", "radial", "--out", out);
      expect(r.status).toBe(2);
      expect(r.stderr).toContain("missing columns");
      expect(r.stderr).toContain("unexpected columns: whatever");
      expect(fs.existsSync(out)).toBe(false);
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });

  it("exits 1 when the results file does not exist", () => {
    const r = run(PLOT, "--rows", "/tmp/never/results.csv", "--kind", "radial", "--out", "/tmp/x.svg");
    expect(r.status).toBe(1);
  });

  it("renders every kind from the canonical results", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "cli-plot-ok-"));
    try {
      for (const kind of ["radial", "parallel", "bitcurve", "histogram"]) {
        const out = path.join(dir, `${kind}.svg`);
        const r = run(PLOT, "--rows", results, "--kind", kind, "--out", out);
        expect(r.status, r.stderr).toBe(0);
        expect(r.stdout).toContain(`wrote ${out}`);
        expect(fs.readFileSync(out, "utf-8").startsWith("<svg")).toBe(true);
      }
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });
});
