/**
 * CSV dataset reader: header sample_id,label,f0..f{d-1}; label 0 nominal,
 * 1 anomalous; feature cells are binary32 values printed as shortest
 * round-trip decimals.
 */

import fs from "node:fs";
import Papa from "papaparse";

export interface Dataset {
  ids: number[];
  labels: Int8Array;
  x: Float64Array[]; // binary32 values widened to float64
  dim: number;
}

export class DatasetFormatError extends Error {}

export function parseDatasetCsv(text: string): Dataset {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new DatasetFormatError(`malformed CSV: ${parsed.errors[0].message}`);
  }
  const rows = parsed.data;
  if (rows.length === 0) throw new DatasetFormatError("empty dataset file");
  const header = rows[0];
  if (header[0] !== "sample_id" || header[1] !== "label") {
    throw new DatasetFormatError(
      `bad header: expected sample_id,label,f0..; got ${header.slice(0, 3).join(",")}..`,
    );
  }
  const dim = header.length - 2;
  for (let i = 0; i < dim; i++) {
    if (header[2 + i] !== `f${i}`) {
      throw new DatasetFormatError(`bad feature column ${header[2 + i]}, expected f${i}`);
    }
  }
  if (rows.length === 1) throw new DatasetFormatError("dataset has no rows");

  const ids: number[] = [];
  const labels = new Int8Array(rows.length - 1);
  const x: Float64Array[] = [];
  for (let r = 1; r < rows.length; r++) {
    const cells = rows[r];
    if (cells.length !== header.length) {
      throw new DatasetFormatError(`row ${r} has ${cells.length} cells, expected ${header.length}`);
    }
    const id = Number(cells[0]);
    if (!Number.isInteger(id)) throw new DatasetFormatError(`row ${r}: bad sample_id ${cells[0]}`);
    const label = Number(cells[1]);
    if (label !== 0 && label !== 1) throw new DatasetFormatError(`row ${r}: bad label ${cells[1]}`);
    const feats = new Float64Array(dim);
    for (let i = 0; i < dim; i++) {
      const v = Number(cells[2 + i]);
      if (!Number.isFinite(v)) throw new DatasetFormatError(`row ${r}: non-finite feature ${cells[2 + i]}`);
      feats[i] = Math.fround(v); // recover the exact binary32 value
    }
    ids.push(id);
    labels[r - 1] = label;
    x.push(feats);
  }
  return { ids, labels, x, dim };
}

export function readDatasetCsv(path: string): Dataset {
  return parseDatasetCsv(fs.readFileSync(path, "utf-8"));
}

/** Rows with the given label. */
export function selectLabel(ds: Dataset, label: 0 | 1): Float64Array[] {
  return ds.x.filter((_, i) => ds.labels[i] === label);
}
