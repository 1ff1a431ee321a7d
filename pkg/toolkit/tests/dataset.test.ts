/**
 * Window-dataset CSV parsing tests against files written by the
 * fault-injection runner, plus malformed-input rejection.
 */

import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { DatasetFormatError, parseDatasetCsv, readDatasetCsv, selectLabel } from "../src/dataset.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.join(HERE, "..", "..", "data", "fixtures");

const GOOD = "sample_id,label,f0,f1\n0,0,1.5,-2.25\n1,1,0.1,3\n";

describe("parseDatasetCsv", () => {
  it("reads ids, labels and binary32 features", () => {
    const ds = parseDatasetCsv(GOOD);
    expect(ds.dim).toBe(2);
    expect(ds.ids).toEqual([0, 1]);
    expect([...ds.labels]).toEqual([0, 1]);
    expect([...ds.x[0]]).toEqual([1.5, -2.25]);
    expect(ds.x[1][0]).toBe(Math.fround(0.1));
  });

  it("rejects wrong headers, labels, widths and values", () => {
    expect(() => parseDatasetCsv("")).toThrow(DatasetFormatError);
    expect(() => parseDatasetCsv("id,label,f0\n0,0,1\n")).toThrow(/bad header/);
    expect(() => parseDatasetCsv("sample_id,label,f1\n0,0,1\n")).toThrow(/expected f0/);
    expect(() => parseDatasetCsv("sample_id,label,f0\n")).toThrow(/no rows/);
    expect(() => parseDatasetCsv("sample_id,label,f0\n0,2,1\n")).toThrow(/bad label/);
    expect(() => parseDatasetCsv("sample_id,label,f0\n0,0\n")).toThrow(/cells/);
    expect(() => parseDatasetCsv("sample_id,label,f0\nx,0,1\n")).toThrow(/sample_id/);
    expect(() => parseDatasetCsv("sample_id,label,f0\n0,0,inf\n")).toThrow(/non-finite/);
  });
});

describe("runner-written splits", () => {
  it("load with the documented shape", () => {
    for (const split of ["train", "val", "test"]) {
      const ds = readDatasetCsv(path.join(FIXTURES, `${split}.csv`));
      expect(ds.dim).toBe(8);
      const nominal = selectLabel(ds, 0).length;
      const anomalous = selectLabel(ds, 1).length;
      expect(nominal).toBe(250);
      expect(anomalous).toBe(750);
      // every stored feature is an exact binary32 value
      for (const row of ds.x.slice(0, 20)) {
        for (const v of row) expect(Math.fround(v)).toBe(v);
      }
    }
  });
});
