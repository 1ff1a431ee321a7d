/**
 * Weights-file format tests: header layout, canonical NaN threshold,
 * payload order round trips, malformed-file rejection, and byte-level
 * agreement with the fault-injection runner's loader.
 */

import { spawnSync } from "node:child_process";
import { createHash } from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { Flow, ModelDef } from "../src/flow.js";
import {
  HEADER_SIZE,
  loadFlow,
  MAGIC,
  parseWeights,
  payloadFloats,
  serializeFlow,
  WeightsFormatError,
} from "../src/weights.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.join(HERE, "..", "..", "data", "fixtures");

const TINY: ModelDef = { inputDim: 4, nCoupling: 2, fcDepth: 2, units: 3 };

const sha256 = (b: Uint8Array) => createHash("sha256").update(b).digest("hex");

describe("header layout", () => {
  it("writes magic, dims, scheme and threshold at fixed offsets", () => {
    const bytes = serializeFlow(new Flow(TINY, 7n), 0.5);
    expect(new TextDecoder().decode(bytes.subarray(0, 5))).toBe(MAGIC);
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
    expect(view.getUint32(5, true)).toBe(4);
    expect(view.getUint32(9, true)).toBe(2);
    expect(view.getUint32(13, true)).toBe(2);
    expect(view.getUint32(17, true)).toBe(3);
    expect(view.getUint8(21)).toBe(0);
    expect(view.getFloat32(22, true)).toBe(0.5);
    expect(bytes.length).toBe(HEADER_SIZE + 4 * payloadFloats(TINY));
  });

  it("stores a missing threshold as the canonical quiet NaN", () => {
    const bytes = serializeFlow(new Flow(TINY, 7n), null);
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
    expect(view.getUint32(22, true)).toBe(0x7fc00000);
    expect(parseWeights(bytes).threshold).toBeNull();
    // any NaN input collapses to the same bit pattern
    const viaNan = serializeFlow(new Flow(TINY, 7n), Number.NaN);
    expect(sha256(viaNan)).toBe(sha256(bytes));
  });

  it("counts payload floats from the layer shapes", () => {
    // per net: (3x2 + 3) + (2x3 + 2) = 17; two nets per coupling, two couplings
    expect(payloadFloats(TINY)).toBe(68);
    expect(payloadFloats({ inputDim: 8, nCoupling: 4, fcDepth: 3, units: 32 })).toBe(10784);
  });
});

describe("round trips", () => {
  it("parse then reload then serialize is byte identical", () => {
    const original = serializeFlow(new Flow(TINY, 99n), 1.25);
    const parsed = parseWeights(original);
    expect(parsed.def).toEqual(TINY);
    expect(parsed.threshold).toBe(1.25);
    const again = serializeFlow(loadFlow(parsed), parsed.threshold);
    expect(sha256(again)).toBe(sha256(original));
  });

  it("keeps the first payload float equal to the first scale weight", () => {
    const flow = new Flow(TINY, 31n);
    const bytes = serializeFlow(flow, null);
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
    expect(view.getFloat32(HEADER_SIZE, true)).toBe(Math.fround(flow.scaleNets[0][0].w[0]));
  });

  it("reload preserves the density function", () => {
    const flow = new Flow(TINY, 11n);
    const bytes = serializeFlow(flow, null);
    const back = loadFlow(parseWeights(bytes));
    const rows = [Float64Array.from([0.3, -1.2, 0.8, 0.05])];
    // serialization rounds to binary32, so compare loosely
    expect(back.logProbRows(rows)[0]).toBeCloseTo(flow.logProbRows(rows)[0], 4);
    const again = loadFlow(parseWeights(serializeFlow(back, null)));
    // but a second trip is exact: binary32 is a fixed point of the round
    expect(again.logProbRows(rows)[0]).toBe(back.logProbRows(rows)[0]);
  });
});

describe("malformed files", () => {
  const good = () => serializeFlow(new Flow(TINY, 7n), 0.5);

  it("rejects a bad magic", () => {
    const b = good();
    b[0] = 0x58;
    expect(() => parseWeights(b)).toThrow(WeightsFormatError);
    expect(() => parseWeights(b)).toThrow(/magic/);
  });

  it("rejects a truncated header", () => {
    expect(() => parseWeights(good().subarray(0, 12))).toThrow(/truncated header/);
  });

  it("rejects a truncated payload with the missing offset", () => {
    const b = good();
    expect(() => parseWeights(b.subarray(0, b.length - 4))).toThrow(/truncated payload/);
  });

  it("rejects trailing bytes", () => {
    const b = good();
    const padded = new Uint8Array(b.length + 4);
    padded.set(b);
    expect(() => parseWeights(padded)).toThrow(/trailing/);
  });

  it("rejects unknown mask schemes", () => {
    const b = good();
    b[21] = 3;
    expect(() => parseWeights(b)).toThrow(/scheme 3/);
  });
});

describe("runner interoperability", () => {
  const fixture = path.join(FIXTURES, "c4d3u32.rnvp");

  it("parses the committed detector fixture", () => {
    const parsed = parseWeights(fs.readFileSync(fixture));
    expect(parsed.def).toEqual({ inputDim: 8, nCoupling: 4, fcDepth: 3, units: 32 });
    expect(parsed.threshold).toBe(-32.987823486328125);
    for (const v of parsed.payload) expect(Number.isFinite(v)).toBe(true);
  });

  it("round trips byte for byte through the runner's loader", () => {
    const script = [
      "import hashlib, sys",
      "from flowfi.modelio import load_model, save_model_bytes",
      "m = load_model(sys.argv[1])",
      "print(hashlib.sha256(save_model_bytes(m)).hexdigest())",
    ].join("\n");
    const run = spawnSync("python3", ["-c", script, fixture], { encoding: "utf8" });
    expect(run.status, run.stderr).toBe(0);
    expect(run.stdout.trim()).toBe(sha256(fs.readFileSync(fixture)));
  });
});
