#!/usr/bin/env node
/**
 * plot: render one figure from a campaign results CSV.
 *
 * Exit 2 on configuration errors (bad flags, schema mismatch), 1 on
 * runtime failures (missing file). No output file is written on error.
 */

import { parseArgs } from "node:util";

import { FIGURE_KINDS, FigureKind, renderFigureFile } from "./figures.js";
import { SchemaError } from "./resultsCsv.js";

const HELP = `usage: plot --rows <results.csv> --kind <kind> --out <figure.svg> [--bins K]

kinds: ${FIGURE_KINDS.join(", ")}
  radial     mean aggregate SDC per model, one spoke each
  parallel   one line per experiment; darker = higher SDC
  bitcurve   SDC+DUE versus flipped bit position
  histogram  distribution of per-experiment SDC rates (--bins, default 20)
`;

export function main(argv: string[]): number {
  let rows: string;
  let kind: FigureKind;
  let out: string;
  let bins: number | undefined;
  try {
    const { values } = parseArgs({
      args: argv,
      options: {
        rows: { type: "string" },
        kind: { type: "string" },
        out: { type: "string" },
        bins: { type: "string" },
        help: { type: "boolean", default: false },
      },
    });
    if (values.help) {
      process.stdout.write(HELP);
      return 0;
    }
    if (!values.rows || !values.kind || !values.out) {
      throw new Error("--rows, --kind, and --out are required");
    }
    if (!FIGURE_KINDS.includes(values.kind as FigureKind)) {
      throw new Error(`--kind must be one of ${FIGURE_KINDS.join(", ")}, got ${values.kind}`);
    }
    rows = values.rows;
    kind = values.kind as FigureKind;
    out = values.out;
    if (values.bins !== undefined) {
      bins = Number(values.bins);
      if (!Number.isInteger(bins) || bins < 2) throw new Error(`--bins must be an integer >= 2, got ${values.bins}`);
    }
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 2;
  }

  try {
    renderFigureFile(rows, kind, out, { bins });
    process.stdout.write(`wrote ${out}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return err instanceof SchemaError ? 2 : 1;
  }
}

process.exit(main(process.argv.slice(2)));
