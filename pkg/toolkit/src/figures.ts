/**
 * SVG figure renderers over campaign result rows.
 *
 * radial    - one spoke per model, radius = mean aggregate SDC
 * parallel  - one polyline per experiment across the plan axes;
 *             darker lines carry higher SDC
 * bitcurve  - SDC+DUE versus flipped bit position, one line per
 *             configuration family (same plan except the bit)
 * histogram - distribution of per-experiment SDC rates
 *
 * Every renderer validates the schema first and never writes a file on
 * error.
 */

import fs from "node:fs";

import { ResultRow, isAggregate, parseResultsCsv } from "./resultsCsv.js";

export type FigureKind = "radial" | "parallel" | "bitcurve" | "histogram";

export const FIGURE_KINDS: FigureKind[] = ["radial", "parallel", "bitcurve", "histogram"];

const W = 720;
const H = 540;
const FONT = "font-family=\"sans-serif\" font-size=\"12\"";

function svgOpen(title: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
    `viewBox="0 0 ${W} ${H}">\n<title>${title}</title>\n` +
    `<rect width="${W}" height="${H}" fill="white"/>\n`
  );
}

const fmt = (v: number): string => (Math.round(v * 100) / 100).toString();

/** D{depth}U{units} display label for grid ids like C4D3U32. */
export function modelLabel(modelId: string): string {
  const m = /^C(\d+)D(\d+)U(\d+)$/.exec(modelId);
  return m ? `D${m[2]}U${m[3]}` : modelId;
}

function renderRadial(rows: ResultRow[]): string {
  const agg = rows.filter(isAggregate);
  if (agg.length === 0) throw new Error("radial figure needs aggregate rows (seed_index == -1)");
  const byModel = new Map<string, number[]>();
  for (const row of agg) {
    const list = byModel.get(row.modelId) ?? [];
    list.push(row.sdcRate);
    byModel.set(row.modelId, list);
  }
  const models = [...byModel.keys()].sort();
  const means = models.map((m) => {
    const v = byModel.get(m)!;
    return v.reduce((a, b) => a + b, 0) / v.length;
  });
  const rMax = Math.max(...means, 1e-9);
  const cx = W / 2;
  const cy = H / 2 + 10;
  const radius = Math.min(W, H) / 2 - 70;

  let svg = svgOpen("mean aggregate SDC per model");
  for (const frac of [0.25, 0.5, 0.75, 1]) {
    svg += `<circle cx="${cx}" cy="${cy}" r="${fmt(radius * frac)}" fill="none" stroke="#ddd"/>\n`;
  }
  const pts: string[] = [];
  models.forEach((m, i) => {
    const angle = (2 * Math.PI * i) / models.length - Math.PI / 2;
    const ex = cx + radius * Math.cos(angle);
    const ey = cy + radius * Math.sin(angle);
    svg += `<line class="spoke" x1="${cx}" y1="${cy}" x2="${fmt(ex)}" y2="${fmt(ey)}" stroke="#bbb"/>\n`;
    const lx = cx + (radius + 24) * Math.cos(angle);
    const ly = cy + (radius + 24) * Math.sin(angle);
    svg += `<text x="${fmt(lx)}" y="${fmt(ly)}" text-anchor="middle" ${FONT}>${modelLabel(m)}</text>\n`;
    const rr = (radius * means[i]) / rMax;
    pts.push(`${fmt(cx + rr * Math.cos(angle))},${fmt(cy + rr * Math.sin(angle))}`);
  });
  svg += `<polygon points="${pts.join(" ")}" fill="rgba(60,90,200,0.25)" stroke="rgb(60,90,200)" stroke-width="1.5"/>\n`;
  svg += `<text x="${W / 2}" y="20" text-anchor="middle" ${FONT}>mean aggregate SDC per model (outer ring ${rMax.toPrecision(3)})</text>\n`;
  return svg + "</svg>\n";
}

const PARALLEL_AXES = [
  "type",
  "mode",
  "variable",
  "amount",
  "bit",
  "direction",
  "sign",
  "activation",
  "method",
  "sdc_rate",
] as const;

function axisValue(row: ResultRow, axis: (typeof PARALLEL_AXES)[number]): string | number {
  switch (axis) {
    case "type":
      return row.type;
    case "mode":
      return row.mode;
    case "variable":
      return row.variable;
    case "amount":
      return row.amount;
    case "bit":
      return row.bit;
    case "direction":
      return row.direction;
    case "sign":
      return row.sign;
    case "activation":
      return row.activation;
    case "method":
      return row.method;
    case "sdc_rate":
      return row.sdcRate;
  }
}

/** Grey level for an SDC rate: darker = higher, monotone by construction. */
export function sdcGrey(sdc: number, minSdc: number, maxSdc: number): number {
  const rel = maxSdc > minSdc ? (sdc - minSdc) / (maxSdc - minSdc) : 1;
  return Math.round(225 - 205 * rel);
}

function renderParallel(rows: ResultRow[]): string {
  const exps = rows.filter((r) => !isAggregate(r));
  if (exps.length === 0) throw new Error("parallel figure needs experiment rows (seed_index >= 0)");

  // Per-axis normalized position: numeric axes min-max scaled, text axes
  // spread over their sorted unique values.
  const positions: Array<Map<string, number>> = PARALLEL_AXES.map((axis) => {
    const raw = exps.map((r) => String(axisValue(r, axis)));
    const uniq = [...new Set(raw)];
    const numeric = uniq.every((v) => v !== "" && !Number.isNaN(Number(v)));
    const map = new Map<string, number>();
    if (numeric && uniq.length > 1) {
      const nums = uniq.map(Number);
      const lo = Math.min(...nums);
      const hi = Math.max(...nums);
      for (const v of uniq) map.set(v, hi > lo ? (Number(v) - lo) / (hi - lo) : 0.5);
    } else {
      const sorted = [...uniq].sort();
      sorted.forEach((v, i) => map.set(v, sorted.length > 1 ? i / (sorted.length - 1) : 0.5));
    }
    return map;
  });

  const left = 50;
  const right = W - 30;
  const top = 50;
  const bottom = H - 40;
  const ax = (i: number) => left + ((right - left) * i) / (PARALLEL_AXES.length - 1);
  const ay = (v: number) => bottom - (bottom - top) * v;

  const sdcs = exps.map((r) => r.sdcRate);
  const minSdc = Math.min(...sdcs);
  const maxSdc = Math.max(...sdcs);

  let svg = svgOpen("per-experiment plan coordinates, darker = higher SDC");
  PARALLEL_AXES.forEach((axis, i) => {
    svg += `<line x1="${fmt(ax(i))}" y1="${top}" x2="${fmt(ax(i))}" y2="${bottom}" stroke="#999"/>\n`;
    svg += `<text x="${fmt(ax(i))}" y="${H - 18}" text-anchor="middle" ${FONT}>${axis}</text>\n`;
  });
  // draw light lines first so dark (high SDC) lines stay visible on top
  const order = exps.map((_, i) => i).sort((a, b) => sdcs[b] - sdcs[a]);
  for (const idx of order.reverse()) {
    const row = exps[idx];
    const pts = PARALLEL_AXES.map((axis, i) => {
      const pos = positions[i].get(String(axisValue(row, axis))) ?? 0.5;
      return `${fmt(ax(i))},${fmt(ay(pos))}`;
    });
    const grey = sdcGrey(row.sdcRate, minSdc, maxSdc);
    svg +=
      `<polyline class="pline" data-sdc="${row.sdcRate}" points="${pts.join(" ")}" ` +
      `fill="none" stroke="rgb(${grey},${grey},${grey})" stroke-width="1"/>\n`;
  }
  svg += `<text x="${W / 2}" y="20" text-anchor="middle" ${FONT}>experiments across plan axes (darker = higher SDC)</text>\n`;
  return svg + "</svg>\n";
}

function renderBitcurve(rows: ResultRow[]): string {
  const agg = rows.filter((r) => isAggregate(r) && /^\d+$/.test(r.bit));
  if (agg.length === 0) {
    throw new Error("bitcurve figure needs aggregate rows with a fixed bit position");
  }
  // configuration family = everything in the plan except the bit
  const famKey = (r: ResultRow) =>
    [r.domain, r.type, r.modelId, r.mode, r.variable, r.amount, r.direction, r.sign, r.activation, r.method].join("|");
  const families = new Map<string, ResultRow[]>();
  for (const row of agg) {
    const list = families.get(famKey(row)) ?? [];
    list.push(row);
    families.set(famKey(row), list);
  }

  const left = 60;
  const right = W - 30;
  const top = 50;
  const bottom = H - 60;
  const ax = (bit: number) => left + ((right - left) * bit) / 31;
  const ay = (v: number) => bottom - (bottom - top) * v;

  let svg = svgOpen("SDC+DUE per flipped bit position");
  for (const g of [0, 0.25, 0.5, 0.75, 1]) {
    svg += `<line x1="${left}" y1="${fmt(ay(g))}" x2="${right}" y2="${fmt(ay(g))}" stroke="#eee"/>\n`;
    svg += `<text x="${left - 8}" y="${fmt(ay(g) + 4)}" text-anchor="end" ${FONT}>${g}</text>\n`;
  }
  for (let bit = 0; bit <= 31; bit += 4) {
    svg += `<text x="${fmt(ax(bit))}" y="${bottom + 18}" text-anchor="middle" ${FONT}>${bit}</text>\n`;
  }
  const colors = ["rgb(60,90,200)", "rgb(200,90,60)", "rgb(60,160,90)", "rgb(150,60,170)"];
  let fi = 0;
  for (const key of [...families.keys()].sort()) {
    const fam = families.get(key)!.sort((a, b) => Number(a.bit) - Number(b.bit));
    const pts = fam.map((r) => `${fmt(ax(Number(r.bit)))},${fmt(ay(Math.min(1, r.sdcRate + r.dueRate)))}`);
    svg +=
      `<polyline class="bitline" points="${pts.join(" ")}" fill="none" ` +
      `stroke="${colors[fi % colors.length]}" stroke-width="1.5"/>\n`;
    fi += 1;
  }
  svg += `<text x="${W / 2}" y="20" text-anchor="middle" ${FONT}>SDC+DUE rate by flipped bit (bit 0 = LSB, 31 = sign)</text>\n`;
  svg += `<text x="${W / 2}" y="${H - 14}" text-anchor="middle" ${FONT}>bit position</text>\n`;
  return svg + "</svg>\n";
}

function renderHistogram(rows: ResultRow[], bins: number): string {
  const exps = rows.filter((r) => !isAggregate(r));
  if (exps.length === 0) throw new Error("histogram figure needs experiment rows (seed_index >= 0)");
  if (!Number.isInteger(bins) || bins < 2) throw new Error(`bins must be an integer >= 2, got ${bins}`);
  const counts = new Array<number>(bins).fill(0);
  for (const row of exps) {
    const b = Math.min(bins - 1, Math.floor(row.sdcRate * bins));
    counts[b] += 1;
  }
  const peak = Math.max(...counts, 1);

  const left = 60;
  const right = W - 30;
  const top = 50;
  const bottom = H - 60;
  const bw = (right - left) / bins;

  let svg = svgOpen("distribution of per-experiment SDC rates");
  counts.forEach((c, i) => {
    const h = ((bottom - top) * c) / peak;
    svg +=
      `<rect class="hist-bar" x="${fmt(left + i * bw)}" y="${fmt(bottom - h)}" ` +
      `width="${fmt(bw - 1)}" height="${fmt(h)}" fill="rgb(60,90,200)"/>\n`;
  });
  for (const x of [0, 0.25, 0.5, 0.75, 1]) {
    svg += `<text x="${fmt(left + (right - left) * x)}" y="${bottom + 18}" text-anchor="middle" ${FONT}>${x}</text>\n`;
  }
  svg += `<text x="${left - 8}" y="${fmt(top + 4)}" text-anchor="end" ${FONT}>${peak}</text>\n`;
  svg += `<text x="${W / 2}" y="20" text-anchor="middle" ${FONT}>per-experiment SDC rate distribution (${exps.length} experiments)</text>\n`;
  svg += `<text x="${W / 2}" y="${H - 14}" text-anchor="middle" ${FONT}>SDC rate</text>\n`;
  return svg + "</svg>\n";
}

export interface FigureOptions {
  bins?: number;
}

/** Render one figure kind from results-CSV text. Throws before any output on bad input. */
export function renderFigure(csvText: string, kind: FigureKind, opts: FigureOptions = {}): string {
  const rows = parseResultsCsv(csvText);
  switch (kind) {
    case "radial":
      return renderRadial(rows);
    case "parallel":
      return renderParallel(rows);
    case "bitcurve":
      return renderBitcurve(rows);
    case "histogram":
      return renderHistogram(rows, opts.bins ?? 20);
    default:
      throw new Error(`unknown figure kind ${String(kind)}`);
  }
}

/** Read a results CSV, render, and write the SVG. No file is written on error. */
export function renderFigureFile(csvPath: string, kind: FigureKind, outPath: string, opts: FigureOptions = {}): void {
  const text = fs.readFileSync(csvPath, "utf-8");
  const svg = renderFigure(text, kind, opts);
  fs.writeFileSync(outPath, svg);
}
