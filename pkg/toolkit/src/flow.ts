/**
 * Real NVP coupling flow in float64 with hand-written backprop.
 *
 * Forward map per coupling layer: the masked half passes through, the
 * other half is y_u = x_u * exp(s(x_m)) + t(x_m) with log-det sum(s).
 * The scale net ends in Tanh, the translation net in a linear layer,
 * hidden layers are ReLU. Training runs in float64; binary32 is applied
 * only at export.
 */

import { RandomStream, deriveStream, fnv1a64 } from "./rng.js";

export type Activation = "relu" | "tanh" | "linear";

export interface ModelDef {
  inputDim: number;
  nCoupling: number;
  fcDepth: number;
  units: number;
}

export const LOG_2PI = Math.log(2 * Math.PI);

export function validateDef(def: ModelDef): void {
  if (!Number.isInteger(def.inputDim) || def.inputDim < 2 || def.inputDim % 2 !== 0) {
    throw new RangeError(`input_dim must be an even integer >= 2, got ${def.inputDim}`);
  }
  for (const [name, v, min] of [
    ["n_coupling", def.nCoupling, 1],
    ["fc_depth", def.fcDepth, 2],
    ["units", def.units, 1],
  ] as const) {
    if (!Number.isInteger(v) || v < min) {
      throw new RangeError(`${name} must be an integer >= ${min}, got ${v}`);
    }
  }
}

/** (out, in) shape of every FC layer in one net, first to last. */
export function netShapes(def: ModelDef): Array<[number, number]> {
  const half = def.inputDim / 2;
  const shapes: Array<[number, number]> = [[def.units, half]];
  for (let i = 0; i < def.fcDepth - 2; i++) shapes.push([def.units, def.units]);
  shapes.push([half, def.units]);
  return shapes;
}

/** Indices the coupling layer passes through unchanged (even: first half). */
export function maskedIndices(inputDim: number, couplingIndex: number): number[] {
  const half = inputDim / 2;
  const lo = couplingIndex % 2 === 0 ? 0 : half;
  return Array.from({ length: half }, (_, i) => lo + i);
}

export function freeIndices(inputDim: number, couplingIndex: number): number[] {
  const half = inputDim / 2;
  const lo = couplingIndex % 2 === 0 ? half : 0;
  return Array.from({ length: half }, (_, i) => lo + i);
}

export interface Fc {
  nOut: number;
  nIn: number;
  w: Float64Array; // row-major (nOut, nIn)
  b: Float64Array;
  act: Activation;
}

export type Net = Fc[];

function newNet(def: ModelDef, finalAct: Activation, stream: RandomStream): Net {
  return netShapes(def).map(([o, n], i, shapes) => {
    const w = new Float64Array(o * n);
    const std = 1 / Math.sqrt(n);
    for (let k = 0; k < w.length; k++) w[k] = stream.gauss32(0, std);
    return {
      nOut: o,
      nIn: n,
      w,
      b: new Float64Array(o),
      act: i === shapes.length - 1 ? finalAct : "relu",
    };
  });
}

function netForward(net: Net, x: Float64Array): { out: Float64Array; cache: Float64Array[] } {
  const cache: Float64Array[] = [x];
  let h = x;
  for (const fc of net) {
    const out = new Float64Array(fc.nOut);
    for (let j = 0; j < fc.nOut; j++) {
      let acc = fc.b[j];
      const base = j * fc.nIn;
      for (let i = 0; i < fc.nIn; i++) acc += fc.w[base + i] * h[i];
      out[j] = fc.act === "relu" ? (acc > 0 ? acc : 0) : fc.act === "tanh" ? Math.tanh(acc) : acc;
    }
    cache.push(out);
    h = out;
  }
  return { out: h, cache };
}

/** Backprop one row; accumulates into gw/gb, returns grad wrt the input. */
function netBackward(
  net: Net,
  gradOut: Float64Array,
  cache: Float64Array[],
  gw: Float64Array[],
  gb: Float64Array[],
): Float64Array {
  let g = gradOut;
  for (let li = net.length - 1; li >= 0; li--) {
    const fc = net[li];
    const hIn = cache[li];
    const hOut = cache[li + 1];
    const dpre = new Float64Array(fc.nOut);
    for (let j = 0; j < fc.nOut; j++) {
      const go = g[j];
      dpre[j] =
        fc.act === "relu" ? (hOut[j] > 0 ? go : 0) : fc.act === "tanh" ? go * (1 - hOut[j] * hOut[j]) : go;
    }
    const gwl = gw[li];
    const gbl = gb[li];
    for (let j = 0; j < fc.nOut; j++) {
      const d = dpre[j];
      const base = j * fc.nIn;
      for (let i = 0; i < fc.nIn; i++) gwl[base + i] += d * hIn[i];
      gbl[j] += d;
    }
    const gi = new Float64Array(fc.nIn);
    for (let i = 0; i < fc.nIn; i++) {
      let acc = 0;
      for (let j = 0; j < fc.nOut; j++) acc += fc.w[j * fc.nIn + i] * dpre[j];
      gi[i] = acc;
    }
    g = gi;
  }
  return g;
}

interface CouplingCache {
  xm: Float64Array;
  xu: Float64Array;
  es: Float64Array;
  sCache: Float64Array[];
  tCache: Float64Array[];
}

export class Flow {
  readonly def: ModelDef;
  readonly scaleNets: Net[];
  readonly transNets: Net[];
  /** Gradient buffers aligned with scaleNets/transNets layer arrays. */
  gScaleW: Float64Array[][] = [];
  gScaleB: Float64Array[][] = [];
  gTransW: Float64Array[][] = [];
  gTransB: Float64Array[][] = [];

  constructor(def: ModelDef, seed: bigint) {
    validateDef(def);
    this.def = def;
    const stream = deriveStream(seed, [fnv1a64("train-init")]);
    this.scaleNets = Array.from({ length: def.nCoupling }, () => newNet(def, "tanh", stream));
    this.transNets = Array.from({ length: def.nCoupling }, () => newNet(def, "linear", stream));
    this.zeroGrad();
  }

  zeroGrad(): void {
    const zeros = (nets: Net[], pick: (fc: Fc) => number) =>
      nets.map((net) => net.map((fc) => new Float64Array(pick(fc))));
    this.gScaleW = zeros(this.scaleNets, (fc) => fc.w.length);
    this.gScaleB = zeros(this.scaleNets, (fc) => fc.b.length);
    this.gTransW = zeros(this.transNets, (fc) => fc.w.length);
    this.gTransB = zeros(this.transNets, (fc) => fc.b.length);
  }

  /** Flat parameter list: scale nets then translation nets, weights then biases per net. */
  params(): Float64Array[] {
    const out: Float64Array[] = [];
    for (const net of [...this.scaleNets, ...this.transNets]) {
      for (const fc of net) out.push(fc.w);
      for (const fc of net) out.push(fc.b);
    }
    return out;
  }

  /** Gradient list aligned with params(). */
  grads(): Float64Array[] {
    const out: Float64Array[] = [];
    const push = (gw: Float64Array[][], gb: Float64Array[][], i: number) => {
      for (const g of gw[i]) out.push(g);
      for (const g of gb[i]) out.push(g);
    };
    for (let i = 0; i < this.scaleNets.length; i++) push(this.gScaleW, this.gScaleB, i);
    for (let i = 0; i < this.transNets.length; i++) push(this.gTransW, this.gTransB, i);
    return out;
  }

  /** log density of each row under the flow. */
  logProbRows(rows: Float64Array[]): number[] {
    const { inputDim, nCoupling } = this.def;
    return rows.map((x) => {
      let z = x;
      let logDet = 0;
      for (let ci = 0; ci < nCoupling; ci++) {
        const mIdx = maskedIndices(inputDim, ci);
        const uIdx = freeIndices(inputDim, ci);
        const xm = Float64Array.from(mIdx, (k) => z[k]);
        const s = netForward(this.scaleNets[ci], xm).out;
        const t = netForward(this.transNets[ci], xm).out;
        const y = new Float64Array(inputDim);
        for (let k = 0; k < mIdx.length; k++) y[mIdx[k]] = xm[k];
        for (let k = 0; k < uIdx.length; k++) {
          y[uIdx[k]] = z[uIdx[k]] * Math.exp(s[k]) + t[k];
          logDet += s[k];
        }
        z = y;
      }
      let sq = 0;
      for (let k = 0; k < inputDim; k++) sq += z[k] * z[k];
      return -0.5 * inputDim * LOG_2PI - 0.5 * sq + logDet;
    });
  }

  /**
   * Mean negative log-likelihood of the batch; fills gradient buffers.
   */
  lossAndGrad(rows: Float64Array[]): number {
    const { inputDim, nCoupling } = this.def;
    const n = rows.length;
    if (n === 0) throw new RangeError("empty batch");
    this.zeroGrad();

    const zs: Float64Array[] = [];
    const caches: CouplingCache[][] = [];
    let sumLogDet = 0;
    let sumSq = 0;
    for (const x of rows) {
      let z = x;
      const rowCaches: CouplingCache[] = [];
      for (let ci = 0; ci < nCoupling; ci++) {
        const mIdx = maskedIndices(inputDim, ci);
        const uIdx = freeIndices(inputDim, ci);
        const xm = Float64Array.from(mIdx, (k) => z[k]);
        const xu = Float64Array.from(uIdx, (k) => z[k]);
        const sf = netForward(this.scaleNets[ci], xm);
        const tf = netForward(this.transNets[ci], xm);
        const es = new Float64Array(xu.length);
        const y = new Float64Array(inputDim);
        for (let k = 0; k < mIdx.length; k++) y[mIdx[k]] = xm[k];
        for (let k = 0; k < uIdx.length; k++) {
          es[k] = Math.exp(sf.out[k]);
          y[uIdx[k]] = xu[k] * es[k] + tf.out[k];
          sumLogDet += sf.out[k];
        }
        rowCaches.push({ xm, xu, es, sCache: sf.cache, tCache: tf.cache });
        z = y;
      }
      for (let k = 0; k < inputDim; k++) sumSq += z[k] * z[k];
      zs.push(z);
      caches.push(rowCaches);
    }
    const loss = (0.5 * sumSq - sumLogDet) / n + 0.5 * inputDim * LOG_2PI;

    for (let r = 0; r < n; r++) {
      let gz = Float64Array.from(zs[r], (v) => v / n);
      for (let ci = nCoupling - 1; ci >= 0; ci--) {
        const mIdx = maskedIndices(inputDim, ci);
        const uIdx = freeIndices(inputDim, ci);
        const c = caches[r][ci];
        const gYu = Float64Array.from(uIdx, (k) => gz[k]);
        const gXu = new Float64Array(gYu.length);
        const gT = gYu;
        const gS = new Float64Array(gYu.length);
        for (let k = 0; k < gYu.length; k++) {
          gXu[k] = gYu[k] * c.es[k];
          gS[k] = gYu[k] * c.xu[k] * c.es[k] - 1 / n; // log-det term pulls s up
        }
        const gFromScale = netBackward(this.scaleNets[ci], gS, c.sCache, this.gScaleW[ci], this.gScaleB[ci]);
        const gFromTrans = netBackward(this.transNets[ci], gT, c.tCache, this.gTransW[ci], this.gTransB[ci]);
        const gx = new Float64Array(inputDim);
        for (let k = 0; k < mIdx.length; k++) {
          gx[mIdx[k]] = gz[mIdx[k]] + gFromScale[k] + gFromTrans[k];
        }
        for (let k = 0; k < uIdx.length; k++) gx[uIdx[k]] = gXu[k];
        gz = gx;
      }
    }
    return loss;
  }
}
