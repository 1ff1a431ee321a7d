/**
 * Reader for the campaign runner's results CSV.
 *
 * The schema is fixed: 19 named columns, one row per experiment plus one
 * aggregate row per (config, model) marked by seed_index = exp_index = -1.
 */

import Papa from "papaparse";

export const RESULTS_COLUMNS = [
  "config_id",
  "model_id",
  "seed_index",
  "exp_index",
  "injection_domain",
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
  "due_rate",
  "masked_rate",
  "n_samples",
  "baseline_accuracy",
] as const;

export interface ResultRow {
  configId: string;
  modelId: string;
  seedIndex: number;
  expIndex: number;
  domain: string;
  type: string;
  mode: string;
  variable: string;
  amount: string;
  bit: string;
  direction: string;
  sign: string;
  activation: string;
  method: string;
  sdcRate: number;
  dueRate: number;
  maskedRate: number;
  nSamples: number;
  baselineAccuracy: number;
}

/** Raised when a CSV does not match the campaign results schema. */
export class SchemaError extends Error {
  readonly missing: string[];
  readonly unexpected: string[];

  constructor(missing: string[], unexpected: string[]) {
    const parts = [];
    if (missing.length > 0) parts.push(`missing columns: ${missing.join(", ")}`);
    if (unexpected.length > 0) parts.push(`unexpected columns: ${unexpected.join(", ")}`);
    super(`results CSV schema mismatch; ${parts.join("; ") || "no columns found"}`);
    this.missing = missing;
    this.unexpected = unexpected;
  }
}

export function parseResultsCsv(text: string): ResultRow[] {
  const trimmed = text.trim();
  if (trimmed === "") {
    throw new SchemaError([...RESULTS_COLUMNS], []);
  }
  const parsed = Papa.parse<string[]>(trimmed, { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError([...RESULTS_COLUMNS], []);
  }
  const rows = parsed.data;
  const header = rows[0];
  const expected = new Set<string>(RESULTS_COLUMNS);
  const actual = new Set(header);
  const missing = RESULTS_COLUMNS.filter((c) => !actual.has(c));
  const unexpected = header.filter((c) => !expected.has(c));
  if (missing.length > 0 || unexpected.length > 0) {
    throw new SchemaError(missing, unexpected);
  }
  if (rows.length === 1) {
    throw new Error("results CSV has no data rows");
  }
  const col = Object.fromEntries(header.map((name, i) => [name, i]));
  const num = (cells: string[], name: string, r: number): number => {
    const v = Number(cells[col[name]]);
    if (Number.isNaN(v)) throw new Error(`row ${r}: non-numeric ${name}: ${cells[col[name]]}`);
    return v;
  };
  const out: ResultRow[] = [];
  for (let r = 1; r < rows.length; r++) {
    const cells = rows[r];
    if (cells.length !== header.length) {
      throw new Error(`row ${r} has ${cells.length} cells, expected ${header.length}`);
    }
    out.push({
      configId: cells[col.config_id],
      modelId: cells[col.model_id],
      seedIndex: num(cells, "seed_index", r),
      expIndex: num(cells, "exp_index", r),
      domain: cells[col.injection_domain],
      type: cells[col.type],
      mode: cells[col.mode],
      variable: cells[col.variable],
      amount: cells[col.amount],
      bit: cells[col.bit],
      direction: cells[col.direction],
      sign: cells[col.sign],
      activation: cells[col.activation],
      method: cells[col.method],
      sdcRate: num(cells, "sdc_rate", r),
      dueRate: num(cells, "due_rate", r),
      maskedRate: num(cells, "masked_rate", r),
      nSamples: num(cells, "n_samples", r),
      baselineAccuracy: num(cells, "baseline_accuracy", r),
    });
  }
  return out;
}

export const isAggregate = (row: ResultRow): boolean => row.seedIndex === -1;
