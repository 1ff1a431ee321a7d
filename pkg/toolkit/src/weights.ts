/**
 * Binary weights-file format shared with the fault-injection runner.
 *
 * Layout, all little-endian:
 *   bytes 0..4   magic "RNVP1"
 *   bytes 5..24  u32 input_dim, u32 n_coupling, u32 fc_depth, u32 units,
 *                u8 mask scheme (0 = alternating), f32 threshold
 *   bytes 26..   float32 payload: couplings in order, scale net then
 *                translation net, each FC layer as row-major weights
 *                followed by its bias vector
 *
 * An unset threshold is stored as the canonical quiet NaN 0x7FC00000.
 */

import { Flow, Fc, ModelDef, netShapes, validateDef } from "./flow.js";

export const MAGIC = "RNVP1";
export const HEADER_SIZE = 26;
export const MASK_SCHEME_ALTERNATING = 0;

export function payloadFloats(def: ModelDef): number {
  const perNet = netShapes(def).reduce((acc, [o, i]) => acc + o * i + o, 0);
  return def.nCoupling * 2 * perNet;
}

export function serializeFlow(flow: Flow, threshold: number | null): Uint8Array {
  const def = flow.def;
  const total = HEADER_SIZE + 4 * payloadFloats(def);
  const buf = new ArrayBuffer(total);
  const view = new DataView(buf);
  const bytes = new Uint8Array(buf);
  for (let i = 0; i < MAGIC.length; i++) bytes[i] = MAGIC.charCodeAt(i);
  view.setUint32(5, def.inputDim, true);
  view.setUint32(9, def.nCoupling, true);
  view.setUint32(13, def.fcDepth, true);
  view.setUint32(17, def.units, true);
  view.setUint8(21, MASK_SCHEME_ALTERNATING);
  if (threshold === null || Number.isNaN(threshold)) {
    view.setUint32(22, 0x7fc00000, true);
  } else {
    view.setFloat32(22, threshold, true);
  }

  let off = HEADER_SIZE;
  const writeNet = (net: Fc[]) => {
    for (const fc of net) {
      for (let k = 0; k < fc.w.length; k++) {
        view.setFloat32(off, Math.fround(fc.w[k]), true);
        off += 4;
      }
      for (let k = 0; k < fc.b.length; k++) {
        view.setFloat32(off, Math.fround(fc.b[k]), true);
        off += 4;
      }
    }
  };
  for (let ci = 0; ci < def.nCoupling; ci++) {
    writeNet(flow.scaleNets[ci]);
    writeNet(flow.transNets[ci]);
  }
  return bytes;
}

export interface ParsedWeights {
  def: ModelDef;
  threshold: number | null;
  /** float32 payload in file order. */
  payload: Float32Array;
}

export class WeightsFormatError extends Error {}

export function parseWeights(bytes: Uint8Array): ParsedWeights {
  const magic = new TextDecoder().decode(bytes.subarray(0, MAGIC.length));
  if (magic !== MAGIC) throw new WeightsFormatError("not a weights file (bad magic at offset 0)");
  if (bytes.length < HEADER_SIZE) {
    throw new WeightsFormatError(`truncated header: first missing byte at offset ${bytes.length}`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const def: ModelDef = {
    inputDim: view.getUint32(5, true),
    nCoupling: view.getUint32(9, true),
    fcDepth: view.getUint32(13, true),
    units: view.getUint32(17, true),
  };
  const scheme = view.getUint8(21);
  if (scheme !== MASK_SCHEME_ALTERNATING) {
    throw new WeightsFormatError(`unsupported mask scheme ${scheme}`);
  }
  validateDef(def);
  const rawThr = view.getFloat32(22, true);
  const threshold = Number.isNaN(rawThr) ? null : rawThr;
  const expected = HEADER_SIZE + 4 * payloadFloats(def);
  if (bytes.length < expected) {
    throw new WeightsFormatError(
      `truncated payload: expected ${expected} bytes, first missing byte at offset ${bytes.length}`,
    );
  }
  if (bytes.length > expected) {
    throw new WeightsFormatError(`trailing data: file exceeds expected ${expected} bytes`);
  }
  const n = payloadFloats(def);
  const payload = new Float32Array(n);
  for (let i = 0; i < n; i++) payload[i] = view.getFloat32(HEADER_SIZE + 4 * i, true);
  return { def, threshold, payload };
}

/** Rebuild a Flow whose parameters come from a parsed weights file. */
export function loadFlow(parsed: ParsedWeights): Flow {
  const flow = new Flow(parsed.def, 0n);
  let off = 0;
  const fill = (net: Fc[]) => {
    for (const fc of net) {
      for (let k = 0; k < fc.w.length; k++) fc.w[k] = parsed.payload[off++];
      for (let k = 0; k < fc.b.length; k++) fc.b[k] = parsed.payload[off++];
    }
  };
  for (let ci = 0; ci < parsed.def.nCoupling; ci++) {
    fill(flow.scaleNets[ci]);
    fill(flow.transNets[ci]);
  }
  return flow;
}
