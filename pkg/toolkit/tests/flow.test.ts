/**
 * Coupling-flow math tests: mask layout, initialization draw order, the
 * closed-form density of the identity flow, and analytic gradients checked
 * against central finite differences.
 */

import { describe, expect, it } from "vitest";

import {
  Flow,
  freeIndices,
  LOG_2PI,
  maskedIndices,
  ModelDef,
  netShapes,
  validateDef,
} from "../src/flow.js";
import { deriveStream, fnv1a64, RandomStream } from "../src/rng.js";

const SMALL: ModelDef = { inputDim: 4, nCoupling: 2, fcDepth: 2, units: 5 };

function randomRows(n: number, dim: number, seed: bigint): Float64Array[] {
  const s = new RandomStream(seed);
  return Array.from({ length: n }, () => Float64Array.from({ length: dim }, () => s.gauss32()));
}

describe("validateDef", () => {
  it("rejects malformed definitions", () => {
    expect(() => validateDef({ ...SMALL, inputDim: 5 })).toThrow(/even/);
    expect(() => validateDef({ ...SMALL, inputDim: 0 })).toThrow(RangeError);
    expect(() => validateDef({ ...SMALL, nCoupling: 0 })).toThrow(/n_coupling/);
    expect(() => validateDef({ ...SMALL, fcDepth: 1 })).toThrow(/fc_depth/);
    expect(() => validateDef({ ...SMALL, units: 0 })).toThrow(/units/);
  });
});

describe("mask layout", () => {
  it("alternates halves, even couplings passing the first half", () => {
    expect(maskedIndices(8, 0)).toEqual([0, 1, 2, 3]);
    expect(freeIndices(8, 0)).toEqual([4, 5, 6, 7]);
    expect(maskedIndices(8, 1)).toEqual([4, 5, 6, 7]);
    expect(freeIndices(8, 1)).toEqual([0, 1, 2, 3]);
    expect(maskedIndices(8, 2)).toEqual([0, 1, 2, 3]);
  });
});

describe("netShapes", () => {
  it("builds half -> units -> ... -> half", () => {
    expect(netShapes({ inputDim: 8, nCoupling: 4, fcDepth: 3, units: 32 })).toEqual([
      [32, 4],
      [32, 32],
      [4, 32],
    ]);
    expect(netShapes({ inputDim: 6, nCoupling: 1, fcDepth: 2, units: 7 })).toEqual([
      [7, 3],
      [3, 7],
    ]);
  });
});

describe("initialization", () => {
  it("is deterministic in the seed", () => {
    const a = new Flow(SMALL, 7n);
    const b = new Flow(SMALL, 7n);
    const c = new Flow(SMALL, 8n);
    const flat = (f: Flow) => f.params().flatMap((p) => [...p]);
    expect(flat(a)).toEqual(flat(b));
    expect(flat(a)).not.toEqual(flat(c));
  });

  it("draws all scale nets, then all translation nets, weights fan-in scaled", () => {
    const flow = new Flow(SMALL, 41n);
    const stream = deriveStream(41n, [fnv1a64("train-init")]);
    for (const nets of [flow.scaleNets, flow.transNets]) {
      for (const net of nets) {
        for (const fc of net) {
          const std = 1 / Math.sqrt(fc.nIn);
          for (let k = 0; k < fc.w.length; k++) {
            expect(fc.w[k]).toBe(stream.gauss32(0, std));
          }
          expect([...fc.b]).toEqual(new Array(fc.nOut).fill(0));
        }
      }
    }
  });
});

describe("log density", () => {
  it("reduces to the standard normal when all parameters are zero", () => {
    const flow = new Flow({ inputDim: 6, nCoupling: 3, fcDepth: 3, units: 4 }, 1n);
    for (const p of flow.params()) p.fill(0);
    for (const x of randomRows(20, 6, 99n)) {
      let sq = 0;
      for (const v of x) sq += v * v;
      const want = -0.5 * 6 * LOG_2PI - 0.5 * sq;
      expect(flow.logProbRows([x])[0]).toBeCloseTo(want, 12);
    }
  });

  it("agrees with the training loss", () => {
    const flow = new Flow(SMALL, 3n);
    const rows = randomRows(16, SMALL.inputDim, 5n);
    const loss = flow.lossAndGrad(rows);
    const lps = flow.logProbRows(rows);
    const meanLp = lps.reduce((a, b) => a + b, 0) / lps.length;
    expect(loss).toBeCloseTo(-meanLp, 10);
  });
});

describe("gradients", () => {
  it("matches central finite differences on every parameter class", () => {
    const flow = new Flow(SMALL, 123n);
    const rows = randomRows(6, SMALL.inputDim, 55n);
    flow.lossAndGrad(rows);
    const analytic = flow.grads().map((g) => Float64Array.from(g));
    const params = flow.params();
    const eps = 1e-6;
    let checked = 0;
    params.forEach((p, pi) => {
      for (let k = 0; k < p.length; k++) {
        const keep = p[k];
        p[k] = keep + eps;
        const up = flow.lossAndGrad(rows);
        p[k] = keep - eps;
        const down = flow.lossAndGrad(rows);
        p[k] = keep;
        const fd = (up - down) / (2 * eps);
        const g = analytic[pi][k];
        expect(Math.abs(fd - g)).toBeLessThanOrEqual(1e-5 * Math.max(1, Math.abs(g)));
        checked += 1;
      }
    });
    expect(checked).toBeGreaterThan(100);
  });
});
